/**
 * widget.ts - floating chat widget for the coursebot service.
 *
 * One launcher button fixed to the lower right; clicking it swaps in a
 * chat window, clicking the window's close button swaps the launcher
 * back. The transcript lives in page memory only, so it survives
 * open/close but not a reload. All DOM the widget creates sits inside a
 * single container element, styled inline, so unmount() leaves the host
 * page exactly as it was.
 */

export interface WidgetConfig {
  /** Base URL of the chat service; must be absolute (http or https). */
  serviceUrl: string;
  buttonLabel?: string;
  width?: number;
  height?: number;
  /** Element to append the widget container to; defaults to document.body. */
  target?: HTMLElement;
}

export interface TranscriptEntry {
  speaker: "You" | "Bot";
  text: string;
}

interface ChatReply {
  session_id: string;
  response: string;
  confidence: number;
  is_fallback: boolean;
}

export interface WidgetHandle {
  readonly doc: Document;
  readonly serviceUrl: string;
  container: HTMLDivElement;
  button: HTMLButtonElement;
  window: HTMLDivElement;
  transcriptEl: HTMLDivElement;
  inputEl: HTMLInputElement;
  sendButton: HTMLButtonElement;
  entries: TranscriptEntry[];
  sessionId: string | null;
  inFlight: boolean;
  open: boolean;
  unmounted: boolean;
  aborter: AbortController | null;
}

const ERROR_REPLY = "[error] could not reach the bot";

// one widget per document; second mount is a no-op
const mounted = new WeakMap<Document, WidgetHandle>();

function cleanText(text: string): string {
  return text.split(/\s+/).filter(Boolean).join(" ");
}

function assertAbsoluteHttp(url: string): string {
  let parsed: URL;
  try {
    parsed = new URL(url);
  } catch {
    throw new Error(`serviceUrl must be an absolute URL, got "${url}"`);
  }
  if (parsed.protocol !== "http:" && parsed.protocol !== "https:") {
    throw new Error(`serviceUrl must be http(s), got "${url}"`);
  }
  return url.replace(/\/+$/, "");
}

function buildButton(doc: Document, label: string): HTMLButtonElement {
  const btn = doc.createElement("button");
  btn.id = "cb-launcher";
  btn.type = "button";
  btn.textContent = label;
  btn.setAttribute("aria-label", "Open chat");
  Object.assign(btn.style, {
    position: "fixed",
    right: "16px",
    bottom: "16px",
    padding: "10px 18px",
    borderRadius: "18px",
    border: "1px solid #888",
    background: "#2d6cdf",
    color: "white",
    fontSize: "14px",
    cursor: "pointer",
    zIndex: "2147483000",
  });
  return btn;
}

function buildWindow(handle: WidgetHandle, width: number, height: number): void {
  const doc = handle.doc;
  const win = doc.createElement("div");
  win.id = "cb-window";
  Object.assign(win.style, {
    position: "fixed",
    right: "16px",
    bottom: "16px",
    width: `${width}px`,
    height: `${height}px`,
    display: "flex",
    flexDirection: "column",
    background: "#f6f6f6",
    border: "1px solid #888",
    borderRadius: "12px",
    overflow: "hidden",
    fontFamily: "system-ui, sans-serif",
    fontSize: "14px",
    boxShadow: "0 8px 24px rgba(0,0,0,.35)",
    zIndex: "2147483000",
  });

  const bar = doc.createElement("div");
  Object.assign(bar.style, {
    display: "flex",
    justifyContent: "space-between",
    alignItems: "center",
    padding: "6px 10px",
    background: "#2d6cdf",
    color: "white",
  });
  const title = doc.createElement("span");
  title.textContent = "Chat";
  const closeBtn = doc.createElement("button");
  closeBtn.id = "cb-close";
  closeBtn.type = "button";
  closeBtn.textContent = "×";
  closeBtn.setAttribute("aria-label", "Close chat");
  Object.assign(closeBtn.style, {
    border: "none",
    background: "transparent",
    color: "white",
    fontSize: "18px",
    cursor: "pointer",
  });
  closeBtn.addEventListener("click", () => closeChat(handle));
  bar.appendChild(title);
  bar.appendChild(closeBtn);

  const transcript = doc.createElement("div");
  transcript.id = "cb-transcript";
  transcript.setAttribute("role", "log");
  Object.assign(transcript.style, {
    flex: "1",
    background: "white",
    padding: "8px",
    overflowY: "auto",
    whiteSpace: "pre-wrap",
    wordBreak: "break-word",
  });

  const inputRow = doc.createElement("div");
  Object.assign(inputRow.style, {
    display: "flex",
    gap: "6px",
    padding: "8px",
  });
  const input = doc.createElement("input");
  input.id = "cb-input";
  input.type = "text";
  input.setAttribute("aria-label", "Your message");
  Object.assign(input.style, {
    flex: "1",
    padding: "6px 8px",
    border: "1px solid #999",
    borderRadius: "8px",
    background: "#dddddd",
  });
  const sendBtn = doc.createElement("button");
  sendBtn.id = "cb-send";
  sendBtn.type = "button";
  sendBtn.textContent = "Send";
  Object.assign(sendBtn.style, {
    padding: "6px 14px",
    border: "1px solid #888",
    borderRadius: "8px",
    background: "#2d6cdf",
    color: "white",
    cursor: "pointer",
  });

  const submit = () => {
    void send(handle, input.value);
  };
  sendBtn.addEventListener("click", submit);
  input.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") {
      ev.preventDefault();
      submit();
    }
  });

  inputRow.appendChild(input);
  inputRow.appendChild(sendBtn);
  win.appendChild(bar);
  win.appendChild(transcript);
  win.appendChild(inputRow);

  handle.window = win;
  handle.transcriptEl = transcript;
  handle.inputEl = input;
  handle.sendButton = sendBtn;
}

// Rebuild the whole transcript as plain text. textContent assignment is
// the XSS guard: whatever the user or the bot says is never parsed as
// markup. A blank line separates exchanges.
function render(handle: WidgetHandle): void {
  const lines: string[] = [];
  for (const entry of handle.entries) {
    if (entry.speaker === "You" && lines.length > 0) lines.push("");
    lines.push(`${entry.speaker}: ${entry.text}`);
  }
  handle.transcriptEl.textContent = lines.join("\n");
  handle.transcriptEl.scrollTop = handle.transcriptEl.scrollHeight;
}

function setBusy(handle: WidgetHandle, busy: boolean): void {
  handle.inFlight = busy;
  handle.inputEl.disabled = busy;
  handle.sendButton.disabled = busy;
}

function focusInput(handle: WidgetHandle): void {
  // detached test documents have no view to focus in
  if (handle.doc.defaultView) handle.inputEl.focus();
}

/** Current transcript, oldest first. */
export function getTranscript(handle: WidgetHandle): readonly TranscriptEntry[] {
  return handle.entries;
}

/**
 * Put the launcher button on the page. Mounting a second time into the
 * same document is a no-op that returns the existing handle.
 */
export function mount(config: WidgetConfig): WidgetHandle {
  const target = config.target ?? document.body;
  if (!target) throw new Error("mount target not found; does the page have a body?");
  const doc = target.ownerDocument;
  const existing = mounted.get(doc);
  if (existing) return existing;

  const serviceUrl = assertAbsoluteHttp(config.serviceUrl);
  const handle = {
    doc,
    serviceUrl,
    entries: [],
    sessionId: null,
    inFlight: false,
    open: false,
    unmounted: false,
    aborter: null,
  } as unknown as WidgetHandle;

  const container = doc.createElement("div");
  container.id = "cb-widget";
  handle.container = container;
  handle.button = buildButton(doc, config.buttonLabel ?? "Chat");
  handle.button.addEventListener("click", () => openChat(handle));
  buildWindow(handle, config.width ?? 320, config.height ?? 420);

  container.appendChild(handle.button);
  target.appendChild(container);
  mounted.set(doc, handle);
  return handle;
}

/** Swap the launcher for the chat window. */
export function openChat(handle: WidgetHandle): void {
  if (handle.unmounted) throw new Error("widget is unmounted");
  if (handle.open) return;
  handle.button.remove();
  handle.container.appendChild(handle.window);
  handle.open = true;
  render(handle);
  focusInput(handle);
}

/** Swap the chat window back for the launcher. The transcript is kept. */
export function closeChat(handle: WidgetHandle): void {
  if (handle.unmounted) throw new Error("widget is unmounted");
  if (!handle.open) return;
  handle.window.remove();
  handle.container.appendChild(handle.button);
  handle.open = false;
}

/**
 * Send one message. Shows "You: ..." immediately, then "Bot: ..." when
 * the service answers (or an error line if it does not). Ignored when
 * empty after whitespace cleanup or while another request is in flight.
 */
export async function send(handle: WidgetHandle, text: string): Promise<void> {
  if (handle.unmounted || handle.inFlight) return;
  const cleaned = cleanText(text);
  if (!cleaned) return;

  handle.entries.push({ speaker: "You", text: cleaned });
  handle.inputEl.value = "";
  setBusy(handle, true);
  render(handle);

  const body: { text: string; session_id?: string } = { text: cleaned };
  if (handle.sessionId) body.session_id = handle.sessionId;
  handle.aborter = new AbortController();

  let reply: string;
  try {
    const res = await fetch(`${handle.serviceUrl}/api/chat`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal: handle.aborter.signal,
    });
    if (!res.ok) throw new Error(`HTTP ${res.status}`);
    const data = (await res.json()) as ChatReply;
    handle.sessionId = data.session_id;
    reply = data.response;
  } catch {
    reply = ERROR_REPLY;
  }
  handle.aborter = null;
  if (handle.unmounted) return;

  handle.entries.push({ speaker: "Bot", text: reply });
  setBusy(handle, false);
  render(handle);
  focusInput(handle);
}

/** Ask the service how it is doing. Used by embedders and tests. */
export async function checkHealth(
  serviceUrl: string
): Promise<{ status: string; statement_count: number; uptime_seconds: number }> {
  const base = assertAbsoluteHttp(serviceUrl);
  const res = await fetch(`${base}/api/health`);
  if (!res.ok) throw new Error(`HTTP ${res.status}`);
  return res.json();
}

/** Remove everything the widget added to the page. */
export function unmount(handle: WidgetHandle): void {
  if (handle.unmounted) return;
  handle.aborter?.abort();
  handle.container.remove();
  mounted.delete(handle.doc);
  handle.unmounted = true;
}
