// Event-stream subscription with automatic resubscription.
//
// On any stream drop the subscription reopens from the store's last
// rendered seq, so replays after a reconnect are deduplicated by the
// store and the rendered transcript stays gap-free.

import type { TranscriptStore } from "./transcript.js";
import type { Message } from "./types.js";

export interface EventSourceLike {
  addEventListener(type: string, listener: (event: MessageEvent) => void): void;
  close(): void;
}

export type EventSourceFactory = (url: string) => EventSourceLike;

export interface SubscriptionHandlers {
  onEnd?: () => void;
  onReconnect?: (sinceSeq: number) => void;
}

export interface Subscription {
  close(): void;
}

const RECONNECT_DELAY_MS = 300;

export function subscribeEvents(
  urlFor: (since: number) => string,
  store: TranscriptStore,
  handlers: SubscriptionHandlers = {},
  factory: EventSourceFactory = (url) => new EventSource(url),
  schedule: (fn: () => void, ms: number) => void = (fn, ms) => {
    setTimeout(fn, ms);
  },
): Subscription {
  let source: EventSourceLike | null = null;
  let closed = false;

  const open = (since: number) => {
    if (closed) return;
    source = factory(urlFor(since));
    source.addEventListener("message", (event) => {
      store.insert(JSON.parse(event.data) as Message);
    });
    source.addEventListener("end", () => {
      closed = true;
      source?.close();
      handlers.onEnd?.();
    });
    source.addEventListener("error", () => {
      if (closed) return;
      source?.close();
      const since = store.lastSeq;
      handlers.onReconnect?.(since);
      schedule(() => open(since), RECONNECT_DELAY_MS);
    });
  };

  open(store.lastSeq);
  return {
    close() {
      closed = true;
      source?.close();
    },
  };
}
