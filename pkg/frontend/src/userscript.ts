// Userscript entry for pages you cannot edit: a script manager injects
// this into the matched pages and the widget mounts itself. The service
// URL is baked in at build time (WIDGET_SERVICE_URL, see build.mjs).

import { mount } from "./widget";

declare const __SERVICE_URL__: string;

function start(): void {
  mount({ serviceUrl: __SERVICE_URL__ });
}

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", start, { once: true });
} else {
  start();
}
