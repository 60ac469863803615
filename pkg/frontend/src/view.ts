/** The conversation view: message bubbles, SPARQL panels, a live event
 * ticker, artifact links, and chart cards.
 *
 * The view holds no truth of its own: everything displayed can be
 * rebuilt from the service endpoints via refresh().
 */

import { FinalMessage, ServiceClient, TraceEvent, parseCsv } from "./api.js";
import { ChartSpec, renderChart, seriesFromCsv, specFromJson } from "./chart.js";
import { streamEvents } from "./sse.js";

const SPARQL_KEYWORDS =
  /\b(SELECT|WHERE|FILTER|PREFIX|DISTINCT|COUNT|GROUP BY|ORDER BY|LIMIT|OFFSET|AS|ASC|DESC)\b/g;
const FENCE = /```sparql\n([\s\S]*?)```/g;

export function highlightSparql(query: string): string {
  const escaped = query
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
  return escaped.replace(SPARQL_KEYWORDS, '<span class="kw">$1</span>');
}

/** Split a message body into prose and fenced SPARQL segments. */
export function splitSparqlBlocks(body: string): Array<{ kind: "text" | "sparql"; content: string }> {
  const segments: Array<{ kind: "text" | "sparql"; content: string }> = [];
  let last = 0;
  for (const match of body.matchAll(FENCE)) {
    const start = match.index ?? 0;
    if (start > last) segments.push({ kind: "text", content: body.slice(last, start) });
    segments.push({ kind: "sparql", content: match[1].trimEnd() });
    last = start + match[0].length;
  }
  if (last < body.length) segments.push({ kind: "text", content: body.slice(last) });
  return segments;
}

export class ChatView {
  sessionId: string | null = null;
  busy = false;
  private traceLength = 0;

  readonly messagesEl: HTMLElement;
  readonly tickerEl: HTMLElement;

  constructor(
    readonly root: HTMLElement,
    readonly client: ServiceClient,
    readonly doc: Document,
  ) {
    this.messagesEl = this.doc.createElement("div");
    this.messagesEl.className = "messages";
    this.tickerEl = this.doc.createElement("ul");
    this.tickerEl.className = "ticker";
    root.appendChild(this.messagesEl);
    root.appendChild(this.tickerEl);
  }

  async start(): Promise<string> {
    this.sessionId = await this.client.createSession();
    return this.sessionId;
  }

  /** Send one message; a second send while streaming is refused. */
  async send(text: string): Promise<FinalMessage> {
    if (!this.sessionId) throw new Error("no session; call start() first");
    if (this.busy) throw new Error("a turn is already in flight");
    this.busy = true;
    this.root.classList.add("busy");
    try {
      this.appendBubble("user", text);
      const after = this.traceLength;
      const ticker = this.openTicker(after);
      ticker.catch(() => undefined); // no unhandled rejection if the POST fails first
      const result = await this.client.postMessage(this.sessionId, text);
      try {
        await ticker;
      } catch (err) {
        await this.recoverTicker(after, err);
      }
      this.traceLength = result.trace_length;
      await this.appendFinal(result.final);
      return result.final;
    } finally {
      this.busy = false;
      this.root.classList.remove("busy");
    }
  }

  private openTicker(after: number): Promise<unknown> {
    const url = this.client.eventsUrl(this.sessionId as string, after);
    return streamEvents(url, (event) => {
      this.appendTick(`${event.data.agent ?? "?"}: ${event.kind}`);
    });
  }

  /** Stream drop: re-fetch the trace and rebuild the ticker entries. */
  private async recoverTicker(after: number, err: unknown): Promise<void> {
    this.appendTick(`stream dropped (${String(err)}); recovering from trace`);
    const events = await this.client.fetchTrace(this.sessionId as string);
    for (const event of events.slice(after)) {
      this.appendTick(`${event.agent}: ${event.kind}`);
    }
  }

  private appendTick(text: string): void {
    const item = this.doc.createElement("li");
    item.textContent = text;
    this.tickerEl.appendChild(item);
  }

  /** Prose with URLs turned into links whose href is the exact text
   * (spectrum-viewer links must open unmodified). */
  private prose(text: string): HTMLElement {
    const p = this.doc.createElement("p");
    const parts = text.split(/(https?:\/\/[^\s)》»']+)/g);
    for (const part of parts) {
      if (/^https?:\/\//.test(part)) {
        const link = this.doc.createElement("a");
        link.href = part;
        link.textContent = part;
        link.setAttribute("target", "_blank");
        link.setAttribute("rel", "noopener");
        p.appendChild(link);
      } else if (part) {
        p.appendChild(this.doc.createTextNode(part));
      }
    }
    return p;
  }

  appendBubble(role: string, text: string): HTMLElement {
    const bubble = this.doc.createElement("div");
    bubble.className = `bubble ${role}`;
    bubble.textContent = text;
    this.messagesEl.appendChild(bubble);
    return bubble;
  }

  /** Render the terminal message: prose, SPARQL panels, links, charts. */
  async appendFinal(message: FinalMessage): Promise<HTMLElement> {
    const bubble = this.doc.createElement("div");
    const isError = message.kind === "error" || message.meta?.verdict === "invalid";
    bubble.className = `bubble assistant${isError ? " error" : ""}`;
    for (const segment of splitSparqlBlocks(message.body)) {
      if (segment.kind === "sparql") {
        const panel = this.doc.createElement("pre");
        panel.className = "sparql-panel";
        panel.innerHTML = highlightSparql(segment.content);
        bubble.appendChild(panel);
      } else if (segment.content.trim()) {
        bubble.appendChild(this.prose(segment.content.trim()));
      }
    }
    for (const name of message.attachments ?? []) {
      if (name.endsWith(".json")) {
        bubble.appendChild(await this.chartCard(name));
      } else {
        const link = this.doc.createElement("a");
        link.className = "artifact-link";
        link.href = this.client.artifactUrl(this.sessionId as string, name);
        link.textContent = `download ${name}`;
        link.setAttribute("download", name);
        bubble.appendChild(link);
      }
    }
    this.messagesEl.appendChild(bubble);
    return bubble;
  }

  /** Fetch a chart spec artifact and render it (or fall back). */
  async chartCard(name: string): Promise<HTMLElement> {
    const card = this.doc.createElement("div");
    card.className = "chart-card";
    let spec: ChartSpec;
    try {
      spec = specFromJson(
        await this.client.fetchArtifactJson(this.sessionId as string, name),
      );
    } catch (err) {
      card.classList.add("error");
      card.textContent = `could not load chart ${name}: ${String(err)}`;
      return card;
    }
    let points = spec.series;
    if (!points || points.length === 0) {
      try {
        const csv = await this.client.fetchArtifactText(
          this.sessionId as string,
          spec.data.csv,
        );
        points = seriesFromCsv(spec, parseCsv(csv));
      } catch (err) {
        card.classList.add("error");
        card.textContent = `chart data ${spec.data.csv} unavailable: ${String(err)}`;
        return card;
      }
    }
    const rendered = renderChart(spec, points);
    if (rendered.fallback !== null) {
      const notice = this.doc.createElement("p");
      notice.className = "notice";
      notice.textContent = `unsupported chart spec version ${spec.spec_version}; showing raw spec`;
      const raw = this.doc.createElement("pre");
      raw.textContent = rendered.fallback;
      card.appendChild(notice);
      card.appendChild(raw);
      return card;
    }
    card.innerHTML = rendered.svg as string;
    return card;
  }

  /** Rebuild the message list from the service (stateless-truth check). */
  async refresh(): Promise<void> {
    if (!this.sessionId) return;
    const info = await this.client.fetchSession(this.sessionId);
    this.messagesEl.innerHTML = "";
    for (const message of info.messages) {
      if (message.kind === "user_question") {
        this.appendBubble("user", message.body);
      } else if (
        message.kind === "final_answer" ||
        message.kind === "error" ||
        (message.kind === "validation_verdict" && message.meta?.verdict === "invalid")
      ) {
        await this.appendFinal(message);
      }
    }
  }
}
