// Progress-event subscription with reconnect backoff. The server replays
// from the last seen cursor, so a dropped stream never loses events.

import type { ProgressEvent } from "./types";

export interface EventSourceLike {
  onmessage: ((event: MessageEvent) => void) | null;
  onerror: ((event: Event) => void) | null;
  close(): void;
}

export type EventSourceFactory = (url: string) => EventSourceLike;

export interface Subscription {
  close(): void;
}

export function subscribeEvents(
  makeUrl: (after: number) => string,
  onEvent: (event: ProgressEvent) => void,
  makeSource: EventSourceFactory,
  maxBackoffMs = 10_000,
): Subscription {
  let lastSeq = -1;
  let backoff = 500;
  let closed = false;
  let source: EventSourceLike | null = null;
  let timer: ReturnType<typeof setTimeout> | null = null;

  const connect = () => {
    if (closed) return;
    source = makeSource(makeUrl(lastSeq));
    source.onmessage = (message) => {
      backoff = 500;
      const parsed = JSON.parse(message.data) as ProgressEvent;
      lastSeq = parsed.seq;
      onEvent(parsed);
    };
    source.onerror = () => {
      source?.close();
      if (closed) return;
      const delay = Math.min(backoff, maxBackoffMs);
      backoff = Math.min(backoff * 2, maxBackoffMs);
      timer = setTimeout(connect, delay);
    };
  };
  connect();

  return {
    close() {
      closed = true;
      if (timer !== null) clearTimeout(timer);
      source?.close();
    },
  };
}
