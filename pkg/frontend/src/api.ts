/** Client for the session service. The UI talks to nothing else. */

export interface FinalMessage {
  sender: string;
  kind: string;
  body: string;
  attachments: string[];
  meta: Record<string, unknown>;
}

export interface TurnResult {
  final: FinalMessage;
  turn: number;
  trace_length: number;
}

export interface TraceEvent {
  seq: number;
  turn: number;
  agent: string;
  kind: string;
  tool?: string;
  payload?: Record<string, unknown>;
}

export interface SessionInfo {
  session_id: string;
  turns: number;
  messages: FinalMessage[];
  uploaded_files: Record<string, unknown>;
  ledger: Record<string, number>;
}

export interface FileSummary {
  name: string;
  size_bytes: number;
  kind: string;
  details: Record<string, unknown>;
  warnings: string[];
}

/** Mirrors the service default; surfaced to the user before sending. */
export const UPLOAD_CAP_BYTES = 50 * 1024 * 1024;

async function expectOk(response: Response): Promise<Response> {
  if (!response.ok) {
    let detail = `HTTP ${response.status}`;
    try {
      const body = await response.json();
      if (body && body.detail) detail = `${detail}: ${body.detail}`;
    } catch {
      // no JSON body; keep the status line
    }
    throw new Error(detail);
  }
  return response;
}

export class ServiceClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async createSession(): Promise<string> {
    const response = await expectOk(
      await this.fetchFn(this.url("/sessions"), { method: "POST" }),
    );
    const body = (await response.json()) as { session_id: string };
    return body.session_id;
  }

  async postMessage(sessionId: string, text: string): Promise<TurnResult> {
    const response = await expectOk(
      await this.fetchFn(this.url(`/sessions/${sessionId}/messages`), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ text }),
      }),
    );
    return (await response.json()) as TurnResult;
  }

  async uploadFile(
    sessionId: string,
    name: string,
    data: Uint8Array | Blob,
    capBytes: number = UPLOAD_CAP_BYTES,
  ): Promise<FileSummary> {
    const size = data instanceof Blob ? data.size : data.byteLength;
    if (size > capBytes) {
      throw new Error(
        `file is ${size} bytes; the service accepts at most ${capBytes}`,
      );
    }
    const response = await expectOk(
      await this.fetchFn(
        this.url(`/sessions/${sessionId}/files?name=${encodeURIComponent(name)}`),
        { method: "POST", body: data as BodyInit },
      ),
    );
    return (await response.json()) as FileSummary;
  }

  artifactUrl(sessionId: string, name: string): string {
    return this.url(`/sessions/${sessionId}/artifacts/${encodeURIComponent(name)}`);
  }

  eventsUrl(sessionId: string, after: number): string {
    return this.url(`/sessions/${sessionId}/events?after=${after}`);
  }

  async fetchArtifactJson<T>(sessionId: string, name: string): Promise<T> {
    const response = await expectOk(
      await this.fetchFn(this.artifactUrl(sessionId, name)),
    );
    return (await response.json()) as T;
  }

  async fetchArtifactText(sessionId: string, name: string): Promise<string> {
    const response = await expectOk(
      await this.fetchFn(this.artifactUrl(sessionId, name)),
    );
    return await response.text();
  }

  async fetchTrace(sessionId: string): Promise<TraceEvent[]> {
    const response = await expectOk(
      await this.fetchFn(this.url(`/sessions/${sessionId}/trace`)),
    );
    const lines = (await response.text()).trim().split("\n");
    const events: TraceEvent[] = [];
    for (const line of lines) {
      if (!line) continue;
      const parsed = JSON.parse(line);
      if (parsed.kind === "ledger_totals") continue;
      events.push(parsed as TraceEvent);
    }
    return events;
  }

  async fetchSession(sessionId: string): Promise<SessionInfo> {
    const response = await expectOk(
      await this.fetchFn(this.url(`/sessions/${sessionId}`)),
    );
    return (await response.json()) as SessionInfo;
  }
}

/** Minimal CSV reader for chart data (quoted fields, commas, newlines). */
export function parseCsv(text: string): string[][] {
  const rows: string[][] = [];
  let row: string[] = [];
  let field = "";
  let inQuotes = false;
  for (let i = 0; i < text.length; i++) {
    const ch = text[i];
    if (inQuotes) {
      if (ch === '"') {
        if (text[i + 1] === '"') {
          field += '"';
          i++;
        } else {
          inQuotes = false;
        }
      } else {
        field += ch;
      }
    } else if (ch === '"') {
      inQuotes = true;
    } else if (ch === ",") {
      row.push(field);
      field = "";
    } else if (ch === "\n" || ch === "\r") {
      if (ch === "\r" && text[i + 1] === "\n") i++;
      row.push(field);
      field = "";
      rows.push(row);
      row = [];
    } else {
      field += ch;
    }
  }
  if (field.length > 0 || row.length > 0) {
    row.push(field);
    rows.push(row);
  }
  return rows.filter((r) => !(r.length === 1 && r[0] === ""));
}
