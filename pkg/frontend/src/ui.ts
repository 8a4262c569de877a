// DOM layer: session picker, live transcript, tool-call inspector.

import { ApiClient, ApiError } from "./api.js";
import { subscribeEvents, Subscription } from "./sse.js";
import { TranscriptStore } from "./transcript.js";
import type { Message, SessionView } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, className?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class ConsoleApp {
  private store = new TranscriptStore();
  private session: SessionView | null = null;
  private subscription: Subscription | null = null;

  private kbSelect = el("select", "kb-select");
  private newButton = el("button", "primary", "New session");
  private statusLine = el("div", "status", "pick a knowledge base to begin");
  private messageList = el("div", "messages");
  private input = el("textarea", "query-input");
  private sendButton = el("button", "primary", "Send");
  private endButton = el("button", "", "End session");
  private exportLink = el("a", "export", "Export transcript");

  constructor(private api: ApiClient, private root: HTMLElement) {
    this.store.onChange(() => this.renderMessages());
  }

  async mount(): Promise<void> {
    const header = el("header");
    header.append(el("h1", "", "Scene discussion console"), this.kbSelect,
                  this.newButton, this.statusLine);
    const composer = el("div", "composer");
    this.input.placeholder = "Ask the analysts about the knowledge base...";
    composer.append(this.input, this.sendButton, this.endButton, this.exportLink);
    this.root.append(header, this.messageList, composer);

    this.newButton.addEventListener("click", () => void this.createSession());
    this.sendButton.addEventListener("click", () => void this.send());
    this.endButton.addEventListener("click", () => void this.terminate());
    this.setComposerEnabled(false);

    try {
      const kbs = await this.api.listKbs();
      this.kbSelect.replaceChildren(
        ...kbs.map((name) => {
          const option = el("option", "", name);
          option.value = name;
          return option;
        }),
      );
      if (kbs.length === 0) this.setStatus("no knowledge bases on the server", true);
    } catch (error) {
      this.showError(error);
    }
  }

  private setStatus(text: string, isError = false): void {
    this.statusLine.textContent = text;
    this.statusLine.classList.toggle("error", isError);
  }

  private showError(error: unknown): void {
    const text = error instanceof ApiError ? error.message : String(error);
    this.setStatus(text, true);
  }

  private setComposerEnabled(enabled: boolean): void {
    this.input.disabled = !enabled;
    this.sendButton.disabled = !enabled;
    this.endButton.disabled = this.session === null;
  }

  private async createSession(): Promise<void> {
    const kb = this.kbSelect.value;
    if (!kb) return;
    this.subscription?.close();
    this.store.reset();
    try {
      this.session = await this.api.createSession(kb);
    } catch (error) {
      this.showError(error);
      return;
    }
    const id = this.session.id;
    this.exportLink.setAttribute("href", this.api.transcriptUrl(id));
    this.exportLink.setAttribute("download", `${id}.jsonl`);
    this.subscription = subscribeEvents(
      (since) => this.api.eventsUrl(id, since),
      this.store,
      {
        onEnd: () => {
          this.setStatus(`session ${id} terminated`);
          this.setComposerEnabled(false);
        },
        onReconnect: (since) => this.setStatus(`stream dropped, resuming after #${since}`),
      },
    );
    this.setStatus(`session ${id} on kb "${kb}"`);
    this.setComposerEnabled(true);
  }

  private async send(): Promise<void> {
    if (!this.session) return;
    const content = this.input.value.trim();
    if (!content) return;
    this.input.value = "";
    this.setComposerEnabled(false);
    this.setStatus("round in progress...");
    try {
      await this.api.postMessage(this.session.id, content);
      this.setStatus(`session ${this.session.id} on kb "${this.session.kb}"`);
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        this.setStatus("session is terminated; input disabled", true);
        return; // leave the composer disabled
      }
      this.showError(error);
    }
    this.setComposerEnabled(true);
  }

  private async terminate(): Promise<void> {
    if (!this.session) return;
    try {
      await this.api.terminateSession(this.session.id);
    } catch (error) {
      this.showError(error);
    }
  }

  private renderMessages(): void {
    this.messageList.replaceChildren(
      ...this.store.messages.map((message) => this.renderMessage(message)),
    );
    this.messageList.scrollTop = this.messageList.scrollHeight;
  }

  private renderMessage(message: Message): HTMLElement {
    const row = el("div", `message speaker-${message.speaker.replace(/[^a-z0-9-]/gi, "")}`);
    const head = el("div", "message-head");
    head.append(el("span", "seq", `#${message.seq}`),
                el("span", "speaker", message.speaker),
                el("span", "ts", message.ts));
    row.append(head, el("div", "content", message.content));
    for (const call of message.tool_calls) {
      row.append(this.renderToolCall(call.tool, call.digest, JSON.stringify(call.args)));
    }
    return row;
  }

  private renderToolCall(tool: string, digest: string, args: string): HTMLElement {
    const chip = el("details", "tool-call");
    chip.append(el("summary", "", `${tool} ${args} [${digest.slice(0, 8)}]`));
    const body = el("pre", "tool-result", "loading...");
    chip.append(body);
    chip.addEventListener("toggle", () => {
      if (!chip.hasAttribute("open") || body.dataset.loaded || !this.session) return;
      void this.api
        .toolEntry(this.session.id, digest)
        .then((entry) => {
          body.textContent = JSON.stringify(entry.result, null, 2);
          body.dataset.loaded = "1";
        })
        .catch((error) => {
          body.textContent = String(error);
        });
    });
    return chip;
  }
}
