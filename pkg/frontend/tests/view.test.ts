import { Window } from "happy-dom";
import { beforeEach, describe, expect, it, vi } from "vitest";

import { FinalMessage, ServiceClient } from "../src/api.js";
import { ChatView, highlightSparql, splitSparqlBlocks } from "../src/view.js";

function dom(): { document: Document; root: HTMLElement } {
  const window = new Window();
  const document = window.document as unknown as Document;
  const root = document.createElement("div") as unknown as HTMLElement;
  document.body.appendChild(root);
  return { document, root };
}

function fakeClient(overrides: Partial<Record<keyof ServiceClient, unknown>> = {}): ServiceClient {
  const base = {
    baseUrl: "http://svc",
    createSession: vi.fn(async () => "sess"),
    postMessage: vi.fn(),
    uploadFile: vi.fn(),
    artifactUrl: (sid: string, name: string) => `http://svc/sessions/${sid}/artifacts/${name}`,
    eventsUrl: (sid: string, after: number) => `http://svc/sessions/${sid}/events?after=${after}`,
    fetchArtifactJson: vi.fn(),
    fetchArtifactText: vi.fn(),
    fetchTrace: vi.fn(async () => []),
    fetchSession: vi.fn(),
  };
  return Object.assign(base, overrides) as unknown as ServiceClient;
}

function finalMessage(body: string, attachments: string[] = []): FinalMessage {
  return { sender: "supervisor", kind: "final_answer", body, attachments, meta: {} };
}

describe("SPARQL block handling", () => {
  it("splits prose and fenced query blocks", () => {
    const body = "Answer is 3.\n\n```sparql\nSELECT ?x WHERE { ?x a ?y }\n```";
    const segments = splitSparqlBlocks(body);
    expect(segments.map((s) => s.kind)).toEqual(["text", "sparql"]);
    expect(segments[1].content).toContain("SELECT ?x");
  });

  it("highlights keywords and escapes markup", () => {
    const html = highlightSparql("SELECT ?x WHERE { ?x <http://e/p> ?y }");
    expect(html).toContain('<span class="kw">SELECT</span>');
    expect(html).toContain("&lt;http://e/p&gt;");
  });
});

describe("ChatView", () => {
  let view: ChatView;
  let document: Document;

  beforeEach(async () => {
    const d = dom();
    document = d.document;
    view = new ChatView(d.root, fakeClient(), document);
    await view.start();
  });

  it("renders an answer with a SPARQL panel and a download link", async () => {
    const message = finalMessage(
      "The count is 3.\n\n```sparql\nSELECT (COUNT(?f) AS ?n) WHERE { ?f a ?t }\n```",
      ["1-results.csv"],
    );
    const bubble = await view.appendFinal(message);
    expect(bubble.querySelector("p")?.textContent).toContain("The count is 3.");
    const panel = bubble.querySelector(".sparql-panel");
    expect(panel?.textContent).toContain("SELECT");
    const link = bubble.querySelector("a.artifact-link") as HTMLAnchorElement;
    expect(link.getAttribute("href")).toBe("http://svc/sessions/sess/artifacts/1-results.csv");
    expect(link.getAttribute("download")).toBe("1-results.csv");
  });

  it("keeps spectrum links exactly as returned by the service", async () => {
    const url =
      "https://metabolomics-usi.gnps2.org/dashinterface/?usi1=mzspec%3AGNPS%3AT1%3Ascan%3A7";
    const bubble = await view.appendFinal(
      finalMessage(`View the spectrum plot here: ${url}`),
    );
    const link = bubble.querySelector("p a") as HTMLAnchorElement;
    expect(link.getAttribute("href")).toBe(url);
    expect(link.textContent).toBe(url);
  });

  it("marks invalid verdicts as errors", async () => {
    const message: FinalMessage = {
      sender: "validator",
      kind: "validation_verdict",
      body: "Out of scope.",
      attachments: [],
      meta: { verdict: "invalid" },
    };
    const bubble = await view.appendFinal(message);
    expect(bubble.className).toContain("error");
  });

  it("renders chart cards from spec artifacts", async () => {
    const spec = {
      spec_version: 1,
      chart_type: "bar",
      x: "extract",
      y: "count",
      title: "counts per extract",
      data: { csv: "1-results.csv" },
      series: [
        { x: "A", y: "2" },
        { x: "B", y: "1" },
      ],
    };
    (view.client.fetchArtifactJson as ReturnType<typeof vi.fn>).mockResolvedValue(spec);
    const bubble = await view.appendFinal(finalMessage("chart ready", ["2-chart.json"]));
    const svg = bubble.querySelector("svg.chart");
    expect(svg).not.toBeNull();
    expect(bubble.querySelectorAll("rect.bar")).toHaveLength(2);
    expect(svg?.textContent).toContain("counts per extract");
  });

  it("shows a notice plus raw JSON for unknown spec versions", async () => {
    const spec = {
      spec_version: 99,
      chart_type: "bar",
      x: "a",
      title: "t",
      data: { csv: "x.csv" },
      series: [{ x: "A", y: "1" }],
    };
    (view.client.fetchArtifactJson as ReturnType<typeof vi.fn>).mockResolvedValue(spec);
    const bubble = await view.appendFinal(finalMessage("chart", ["9-chart.json"]));
    expect(bubble.querySelector(".notice")?.textContent).toContain("version 99");
    expect(bubble.querySelector("pre")?.textContent).toContain('"spec_version": 99');
  });

  it("shows an error card when the chart artifact is missing", async () => {
    (view.client.fetchArtifactJson as ReturnType<typeof vi.fn>).mockRejectedValue(
      new Error("HTTP 404"),
    );
    const bubble = await view.appendFinal(finalMessage("chart", ["gone-chart.json"]));
    const card = bubble.querySelector(".chart-card.error");
    expect(card?.textContent).toContain("gone-chart.json");
  });

  it("refuses concurrent sends", async () => {
    view.busy = true;
    await expect(view.send("another")).rejects.toThrow(/already in flight/);
  });

  it("refresh rebuilds the conversation from the service", async () => {
    (view.client.fetchSession as ReturnType<typeof vi.fn>).mockResolvedValue({
      session_id: "sess",
      turns: 1,
      uploaded_files: {},
      ledger: {},
      messages: [
        { sender: "user", kind: "user_question", body: "hi", attachments: [], meta: {} },
        finalMessage("answer text"),
      ],
    });
    await view.refresh();
    const bubbles = view.messagesEl.querySelectorAll(".bubble");
    expect(bubbles).toHaveLength(2);
    expect(bubbles[0].textContent).toBe("hi");
    expect(bubbles[1].textContent).toContain("answer text");
  });
});
