// Seq-ordered transcript store.
//
// The server event stream can drop and resume, and a resubscribe may
// replay messages we already rendered. The store renders only the
// gap-free prefix: out-of-order arrivals wait in a buffer until the
// missing seq shows up, and duplicates are ignored, so the rendered
// list always equals the server transcript up to lastSeq.

import type { Message } from "./types.js";

export class TranscriptStore {
  private rendered: Message[] = [];
  private pending = new Map<number, Message>();
  private listeners: Array<(messages: Message[]) => void> = [];

  get lastSeq(): number {
    return this.rendered.length === 0
      ? 0
      : this.rendered[this.rendered.length - 1].seq;
  }

  get messages(): readonly Message[] {
    return this.rendered;
  }

  get pendingCount(): number {
    return this.pending.size;
  }

  onChange(listener: (messages: Message[]) => void): void {
    this.listeners.push(listener);
  }

  insert(message: Message): void {
    if (!Number.isInteger(message.seq) || message.seq < 1) {
      return; // not a transcript message
    }
    if (message.seq <= this.lastSeq || this.pending.has(message.seq)) {
      return; // duplicate delivery after a reconnect
    }
    this.pending.set(message.seq, message);
    let drained = false;
    let next = this.lastSeq + 1;
    while (this.pending.has(next)) {
      this.rendered.push(this.pending.get(next)!);
      this.pending.delete(next);
      drained = true;
      next += 1;
    }
    if (drained) {
      for (const listener of this.listeners) {
        listener(this.rendered);
      }
    }
  }

  insertAll(messages: Message[]): void {
    for (const message of messages) {
      this.insert(message);
    }
  }

  /** Seq values rendered so far; gap-free by construction. */
  seqs(): number[] {
    return this.rendered.map((m) => m.seq);
  }

  reset(): void {
    this.rendered = [];
    this.pending.clear();
    for (const listener of this.listeners) {
      listener(this.rendered);
    }
  }
}
