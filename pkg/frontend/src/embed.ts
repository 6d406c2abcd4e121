// Plain <script> entry. Drop the bundle into a page like
//
//   <script src="coursebot-widget.js"
//           data-service-url="http://127.0.0.1:8000"
//           data-button-label="Course bot"></script>
//
// and it mounts itself. Without data-service-url it assumes the chat
// service lives on the page's own origin.

import { mount } from "./widget";

const script = document.currentScript as HTMLScriptElement | null;

function start(): void {
  mount({
    serviceUrl: script?.dataset.serviceUrl || window.location.origin,
    buttonLabel: script?.dataset.buttonLabel,
    width: script?.dataset.width ? Number(script.dataset.width) : undefined,
    height: script?.dataset.height ? Number(script.dataset.height) : undefined,
  });
}

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", start, { once: true });
} else {
  start();
}
