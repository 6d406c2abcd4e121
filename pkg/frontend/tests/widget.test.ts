import { afterAll, afterEach, beforeAll, describe, expect, it } from "vitest";

import {
  closeChat,
  getTranscript,
  mount,
  openChat,
  send,
  unmount,
  checkHealth,
  type WidgetHandle,
} from "../src/widget";
import { FixtureService } from "./fixture_service";

const service = new FixtureService();
const handles: WidgetHandle[] = [];

beforeAll(() => service.start());
afterAll(() => service.stop());

afterEach(() => {
  for (const h of handles.splice(0)) unmount(h);
  service.reset();
});

// Every test gets its own blank page, the harness version of a reload.
function freshPage(): Document {
  return document.implementation.createHTMLDocument("host page");
}

function mountOn(doc: Document, extra: Record<string, unknown> = {}): WidgetHandle {
  const handle = mount({ serviceUrl: service.url, target: doc.body, ...extra });
  handles.push(handle);
  return handle;
}

function launcher(doc: Document): HTMLButtonElement | null {
  return doc.querySelector("#cb-launcher");
}

function chatWindow(doc: Document): HTMLElement | null {
  return doc.querySelector("#cb-window");
}

function transcriptText(doc: Document): string {
  return doc.querySelector("#cb-transcript")?.textContent ?? "";
}

async function until(cond: () => boolean, ms = 5000): Promise<void> {
  const deadline = Date.now() + ms;
  while (!cond()) {
    if (Date.now() > deadline) throw new Error("condition never became true");
    await new Promise((r) => setTimeout(r, 5));
  }
}

describe("mount", () => {
  it("shows exactly one launcher button in the lower right", () => {
    const doc = freshPage();
    mountOn(doc);
    const buttons = doc.querySelectorAll("#cb-launcher");
    expect(buttons.length).toBe(1);
    const btn = buttons[0] as HTMLButtonElement;
    expect(btn.style.position).toBe("fixed");
    expect(btn.style.right).toBe("16px");
    expect(btn.style.bottom).toBe("16px");
    expect(chatWindow(doc)).toBeNull();
  });

  it("is idempotent: mounting twice returns the same handle and one button", () => {
    const doc = freshPage();
    const first = mountOn(doc);
    const second = mount({ serviceUrl: service.url, target: doc.body });
    expect(second).toBe(first);
    expect(doc.querySelectorAll("#cb-launcher").length).toBe(1);
  });

  it("puts a custom label on the button", () => {
    const doc = freshPage();
    mountOn(doc, { buttonLabel: "Ask the course bot" });
    expect(launcher(doc)?.textContent).toBe("Ask the course bot");
  });

  it("rejects a relative service URL", () => {
    const doc = freshPage();
    expect(() => mount({ serviceUrl: "/api", target: doc.body })).toThrow(/absolute/);
    expect(() => mount({ serviceUrl: "ftp://x.example/", target: doc.body })).toThrow(
      /http/
    );
  });
});

describe("open and close", () => {
  it("open swaps the button for the window, close swaps back", () => {
    const doc = freshPage();
    const h = mountOn(doc);
    openChat(h);
    expect(launcher(doc)).toBeNull();
    expect(chatWindow(doc)).not.toBeNull();
    closeChat(h);
    expect(launcher(doc)).not.toBeNull();
    expect(chatWindow(doc)).toBeNull();
  });

  it("never shows button and window at the same time", () => {
    const doc = freshPage();
    const h = mountOn(doc);
    for (const step of [openChat, openChat, closeChat, closeChat, openChat]) {
      step(h);
      const present = [launcher(doc), chatWindow(doc)].filter(Boolean);
      expect(present.length).toBe(1);
    }
  });

  it("keeps the transcript across close/open", async () => {
    const doc = freshPage();
    const h = mountOn(doc);
    openChat(h);
    await send(h, "Hi there");
    const before = transcriptText(doc);
    expect(before).toContain("You: Hi there");
    expect(before).toContain("Bot: pong: Hi there");
    closeChat(h);
    openChat(h);
    expect(transcriptText(doc)).toBe(before);
  });

  it("a fresh page starts with an empty transcript and nothing persisted", async () => {
    const doc = freshPage();
    const h = mountOn(doc);
    openChat(h);
    await send(h, "remember me");
    expect(getTranscript(h).length).toBe(2);
    // the widget must not stash the conversation anywhere that would
    // survive a reload
    expect(window.localStorage.length).toBe(0);
    expect(window.sessionStorage.length).toBe(0);

    const reloaded = freshPage();
    const h2 = mountOn(reloaded);
    openChat(h2);
    expect(getTranscript(h2).length).toBe(0);
    expect(transcriptText(reloaded)).toBe("");
  });
});

describe("send", () => {
  it("prefixes entries with You: and Bot: and blank-lines between exchanges", async () => {
    const doc = freshPage();
    const h = mountOn(doc);
    openChat(h);
    await send(h, "first question");
    await send(h, "second question");
    expect(transcriptText(doc)).toBe(
      [
        "You: first question",
        "Bot: pong: first question",
        "",
        "You: second question",
        "Bot: pong: second question",
      ].join("\n")
    );
  });

  it("clicking send and pressing Enter make the same request", async () => {
    const doc = freshPage();
    const h = mountOn(doc);
    openChat(h);

    h.inputEl.value = "via click";
    h.sendButton.click();
    await until(() => service.seen.length === 1);
    expect(h.inputEl.value).toBe("");

    await until(() => !h.inputEl.disabled);
    h.inputEl.value = "via enter";
    h.inputEl.dispatchEvent(new KeyboardEvent("keydown", { key: "Enter", bubbles: true }));
    await until(() => service.seen.length === 2);

    expect(service.seen[0]?.text).toBe("via click");
    expect(service.seen[1]?.text).toBe("via enter");
    await until(() => getTranscript(h).length === 4);
  });

  it("ignores input that is empty after whitespace cleanup", async () => {
    const doc = freshPage();
    const h = mountOn(doc);
    openChat(h);
    await send(h, "   ");
    await send(h, "\n\t");
    expect(service.seen.length).toBe(0);
    expect(getTranscript(h).length).toBe(0);
    expect(h.inputEl.disabled).toBe(false);
  });

  it("reuses the session id from the first response", async () => {
    const doc = freshPage();
    const h = mountOn(doc);
    openChat(h);
    await send(h, "one");
    const minted = h.sessionId;
    expect(minted).toMatch(/^fix-\d+$/);
    await send(h, "two");
    await send(h, "three");
    expect(service.seen[0]?.session_id).toBeUndefined();
    expect(service.seen[1]?.session_id).toBe(minted);
    expect(service.seen[2]?.session_id).toBe(minted);
  });

  it("renders injected markup as inert text", async () => {
    const doc = freshPage();
    const h = mountOn(doc);
    openChat(h);
    const payload = `<img src=x onerror="(window.__pwned=1)"> <b>bold?</b>`;
    await send(h, payload);
    const transcript = doc.querySelector("#cb-transcript")!;
    expect(transcript.querySelector("img")).toBeNull();
    expect(transcript.querySelector("b")).toBeNull();
    expect(transcript.textContent).toContain("You: <img src=x");
    expect((window as unknown as Record<string, unknown>).__pwned).toBeUndefined();
  });

  it("allows only one request in flight and disables input meanwhile", async () => {
    const doc = freshPage();
    const h = mountOn(doc);
    openChat(h);
    service.delay = 150;

    h.inputEl.value = "slow one";
    h.sendButton.click();
    await until(() => h.inputEl.disabled);

    // both UI paths and the programmatic path are ignored during flight
    h.inputEl.value = "smuggled";
    h.sendButton.click();
    h.inputEl.dispatchEvent(new KeyboardEvent("keydown", { key: "Enter", bubbles: true }));
    await send(h, "also smuggled");

    await until(() => !h.inputEl.disabled);
    expect(service.seen.map((s) => s.text)).toEqual(["slow one"]);
    expect(getTranscript(h).map((e) => e.text)).toEqual(["slow one", "pong: slow one"]);
  });

  it("shows an error line and recovers when the service is down", async () => {
    const doc = freshPage();
    const h = mount({ serviceUrl: "http://127.0.0.1:9", target: doc.body });
    handles.push(h);
    openChat(h);
    await send(h, "anyone there?");
    expect(transcriptText(doc)).toContain("Bot: [error] could not reach the bot");
    expect(h.inputEl.disabled).toBe(false);
  });

  it("treats an HTTP error status the same way, then works again", async () => {
    const doc = freshPage();
    const h = mountOn(doc);
    openChat(h);
    service.failWith = 500;
    await send(h, "break please");
    expect(transcriptText(doc)).toContain("Bot: [error] could not reach the bot");

    service.failWith = null;
    await send(h, "and now?");
    expect(transcriptText(doc)).toContain("Bot: pong: and now?");
  });

  it("transcript alternates You/Bot starting with You", async () => {
    const doc = freshPage();
    const h = mountOn(doc);
    openChat(h);
    service.failWith = 502;
    await send(h, "a");
    service.failWith = null;
    await send(h, "b");
    const speakers = getTranscript(h).map((e) => e.speaker);
    expect(speakers).toEqual(["You", "Bot", "You", "Bot"]);
  });
});

describe("unmount", () => {
  it("removes every element the widget created", async () => {
    const doc = freshPage();
    const pristine = doc.body.innerHTML;
    const h = mountOn(doc);
    openChat(h);
    await send(h, "leave no trace");
    unmount(h);
    expect(doc.body.innerHTML).toBe(pristine);
    expect(doc.querySelector("#cb-widget")).toBeNull();
  });

  it("allows a clean re-mount afterwards", () => {
    const doc = freshPage();
    const h = mountOn(doc);
    unmount(h);
    const h2 = mountOn(doc);
    expect(h2).not.toBe(h);
    expect(doc.querySelectorAll("#cb-launcher").length).toBe(1);
  });
});

describe("health", () => {
  it("reads the service health endpoint", async () => {
    const health = await checkHealth(service.url);
    expect(health.status).toBe("ok");
    expect(typeof health.statement_count).toBe("number");
  });
});
