/** Declarative chart-spec rendering to inline SVG.
 *
 * The service writes versioned JSON specs; the client draws them. A spec
 * whose version is unsupported falls back to a raw JSON display.
 */

export interface SeriesPoint {
  x: string;
  y?: string;
}

export interface ChartSpec {
  spec_version: number;
  chart_type: "bar" | "histogram" | "scatter" | "line" | string;
  x: string;
  y?: string | null;
  title: string;
  data: { csv: string };
  series?: SeriesPoint[];
}

export const SUPPORTED_SPEC_VERSION = 1;

const WIDTH = 520;
const HEIGHT = 300;
const MARGIN = { top: 36, right: 16, bottom: 48, left: 56 };
const BAR_COLOR = "#2563eb";
const ACCENT = "#059669";

export interface RenderResult {
  svg: string | null;
  fallback: string | null; // raw JSON shown when the version is unknown
}

export function specFromJson(raw: unknown): ChartSpec {
  const spec = raw as ChartSpec;
  if (!spec || typeof spec !== "object" || !spec.chart_type || !spec.x) {
    throw new Error("not a chart spec");
  }
  return spec;
}

/** Rows for the chart: inline series first, else parsed CSV columns. */
export function seriesFromCsv(spec: ChartSpec, csvRows: string[][]): SeriesPoint[] {
  if (!csvRows.length) return [];
  const header = csvRows[0];
  const xIndex = header.indexOf(spec.x);
  const yIndex = spec.y ? header.indexOf(spec.y) : -1;
  if (xIndex < 0) throw new Error(`column ${spec.x} missing from ${spec.data.csv}`);
  return csvRows.slice(1).map((row) => ({
    x: row[xIndex] ?? "",
    y: yIndex >= 0 ? row[yIndex] : undefined,
  }));
}

function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function frame(spec: ChartSpec, body: string): string {
  const title = escapeXml(spec.title);
  const xLabel = escapeXml(spec.x);
  const yLabel = spec.y ? escapeXml(spec.y) : "";
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${WIDTH} ${HEIGHT}" ` +
    `role="img" class="chart chart-${spec.chart_type}">` +
    `<text class="chart-title" x="${WIDTH / 2}" y="20" text-anchor="middle" ` +
    `font-size="14" font-weight="bold">${title}</text>` +
    body +
    `<text class="axis-x" x="${WIDTH / 2}" y="${HEIGHT - 8}" text-anchor="middle" ` +
    `font-size="11">${xLabel}</text>` +
    (yLabel
      ? `<text class="axis-y" x="14" y="${HEIGHT / 2}" text-anchor="middle" ` +
        `font-size="11" transform="rotate(-90 14 ${HEIGHT / 2})">${yLabel}</text>`
      : "") +
    `</svg>`
  );
}

function plotArea(): { x0: number; y0: number; width: number; height: number } {
  return {
    x0: MARGIN.left,
    y0: MARGIN.top,
    width: WIDTH - MARGIN.left - MARGIN.right,
    height: HEIGHT - MARGIN.top - MARGIN.bottom,
  };
}

function numeric(points: SeriesPoint[], pick: (p: SeriesPoint) => string | undefined): number[] {
  return points
    .map((p) => Number(pick(p)))
    .filter((v) => Number.isFinite(v));
}

function renderBars(spec: ChartSpec, points: SeriesPoint[]): string {
  const area = plotArea();
  const values = numeric(points, (p) => p.y);
  const max = Math.max(...values, 0) || 1;
  const slot = area.width / Math.max(points.length, 1);
  const barWidth = Math.max(slot * 0.6, 4);
  let body = "";
  points.forEach((point, i) => {
    const value = Number(point.y);
    const height = Number.isFinite(value) ? (value / max) * area.height : 0;
    const x = area.x0 + i * slot + (slot - barWidth) / 2;
    const y = area.y0 + area.height - height;
    body +=
      `<rect class="bar" x="${x.toFixed(1)}" y="${y.toFixed(1)}" ` +
      `width="${barWidth.toFixed(1)}" height="${height.toFixed(1)}" fill="${BAR_COLOR}">` +
      `<title>${escapeXml(point.x)}: ${escapeXml(String(point.y))}</title></rect>` +
      `<text x="${(x + barWidth / 2).toFixed(1)}" y="${area.y0 + area.height + 14}" ` +
      `text-anchor="middle" font-size="10">${escapeXml(point.x)}</text>`;
  });
  return body;
}

function renderHistogram(spec: ChartSpec, points: SeriesPoint[]): string {
  const values = numeric(points, (p) => p.x);
  if (!values.length) return "";
  const area = plotArea();
  const bins = Math.min(10, Math.max(3, Math.ceil(Math.sqrt(values.length))));
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  const counts = new Array(bins).fill(0);
  for (const value of values) {
    const bin = Math.min(bins - 1, Math.floor(((value - lo) / span) * bins));
    counts[bin] += 1;
  }
  const max = Math.max(...counts) || 1;
  const slot = area.width / bins;
  let body = "";
  counts.forEach((count, i) => {
    const height = (count / max) * area.height;
    body +=
      `<rect class="bar" x="${(area.x0 + i * slot + 1).toFixed(1)}" ` +
      `y="${(area.y0 + area.height - height).toFixed(1)}" ` +
      `width="${(slot - 2).toFixed(1)}" height="${height.toFixed(1)}" fill="${BAR_COLOR}"/>`;
  });
  return body;
}

function renderScatter(spec: ChartSpec, points: SeriesPoint[]): string {
  const area = plotArea();
  const xs = numeric(points, (p) => p.x);
  const ys = numeric(points, (p) => p.y);
  if (!xs.length || !ys.length) return "";
  const [xLo, xHi] = [Math.min(...xs), Math.max(...xs)];
  const [yLo, yHi] = [Math.min(...ys), Math.max(...ys)];
  const xSpan = xHi - xLo || 1;
  const ySpan = yHi - yLo || 1;
  let body = "";
  for (const point of points) {
    const x = Number(point.x);
    const y = Number(point.y);
    if (!Number.isFinite(x) || !Number.isFinite(y)) continue;
    const cx = area.x0 + ((x - xLo) / xSpan) * area.width;
    const cy = area.y0 + area.height - ((y - yLo) / ySpan) * area.height;
    body += `<circle class="dot" cx="${cx.toFixed(1)}" cy="${cy.toFixed(1)}" r="4" fill="${ACCENT}"/>`;
  }
  return body;
}

function renderLine(spec: ChartSpec, points: SeriesPoint[]): string {
  const area = plotArea();
  const ys = numeric(points, (p) => p.y);
  if (!ys.length) return "";
  const max = Math.max(...ys) || 1;
  const step = area.width / Math.max(points.length - 1, 1);
  const coords = points
    .map((point, i) => {
      const value = Number(point.y);
      if (!Number.isFinite(value)) return null;
      const x = area.x0 + i * step;
      const y = area.y0 + area.height - (value / max) * area.height;
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .filter((c): c is string => c !== null);
  return `<polyline class="line" points="${coords.join(" ")}" fill="none" stroke="${BAR_COLOR}" stroke-width="2"/>`;
}

export function renderChart(spec: ChartSpec, points?: SeriesPoint[]): RenderResult {
  if (spec.spec_version !== SUPPORTED_SPEC_VERSION) {
    return { svg: null, fallback: JSON.stringify(spec, null, 2) };
  }
  const data = points ?? spec.series ?? [];
  let body: string;
  switch (spec.chart_type) {
    case "histogram":
      body = renderHistogram(spec, data);
      break;
    case "scatter":
      body = renderScatter(spec, data);
      break;
    case "line":
      body = renderLine(spec, data);
      break;
    default:
      body = renderBars(spec, data);
  }
  return { svg: frame(spec, body), fallback: null };
}
