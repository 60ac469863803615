/** Server-sent events over fetch streaming (EventSource is unavailable
 * in tests and unnecessary in modern browsers). */

export interface SseEvent {
  kind: string;
  data: Record<string, unknown>;
}

/** Incremental SSE frame parser; feed() returns completed events. */
export function createSseParser(): { feed: (chunk: string) => SseEvent[] } {
  let buffer = "";
  return {
    feed(chunk: string): SseEvent[] {
      buffer += chunk;
      const frames = buffer.split(/\r?\n\r?\n/);
      buffer = frames.pop() ?? "";
      const events: SseEvent[] = [];
      for (const frame of frames) {
        let kind = "message";
        const dataLines: string[] = [];
        for (const rawLine of frame.split(/\r?\n/)) {
          if (rawLine.startsWith("event:")) {
            kind = rawLine.slice(6).trim();
          } else if (rawLine.startsWith("data:")) {
            dataLines.push(rawLine.slice(5).trim());
          }
        }
        if (dataLines.length === 0) continue;
        let data: Record<string, unknown>;
        try {
          data = JSON.parse(dataLines.join("\n"));
        } catch {
          data = { raw: dataLines.join("\n") };
        }
        events.push({ kind, data });
      }
      return events;
    },
  };
}

/**
 * Stream events from the given URL until the server closes the stream.
 * Resolves with every event received; the caller reconnects (re-fetching
 * the trace) if this rejects mid-turn.
 */
export async function streamEvents(
  url: string,
  onEvent: (event: SseEvent) => void,
  fetchFn: typeof fetch = fetch,
  signal?: AbortSignal,
): Promise<SseEvent[]> {
  const response = await fetchFn(url, {
    headers: { Accept: "text/event-stream" },
    signal,
  });
  if (!response.ok) throw new Error(`event stream HTTP ${response.status}`);
  if (!response.body) throw new Error("event stream has no body");
  const reader = response.body.getReader();
  const decoder = new TextDecoder("utf-8");
  const parser = createSseParser();
  const seen: SseEvent[] = [];
  for (;;) {
    const { value, done } = await reader.read();
    if (done) break;
    for (const event of parser.feed(decoder.decode(value, { stream: true }))) {
      seen.push(event);
      onEvent(event);
    }
  }
  return seen;
}
