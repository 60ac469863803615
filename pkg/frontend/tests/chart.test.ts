import { describe, expect, it } from "vitest";

import { ChartSpec, renderChart, seriesFromCsv } from "../src/chart.js";

function barSpec(): ChartSpec {
  return {
    spec_version: 1,
    chart_type: "bar",
    x: "extract",
    y: "count",
    title: "distribution plot for the count of features",
    data: { csv: "1-results.csv" },
    series: [
      { x: "VGF_tc_pos", y: "2" },
      { x: "VGF_mh_pos", y: "1" },
      { x: "VGF_xx_pos", y: "3" },
    ],
  };
}

describe("chart rendering", () => {
  it("draws one bar per category", () => {
    const { svg, fallback } = renderChart(barSpec());
    expect(fallback).toBeNull();
    expect(svg).not.toBeNull();
    const bars = (svg as string).match(/<rect class="bar"/g) ?? [];
    expect(bars).toHaveLength(3);
  });

  it("includes the spec title and axis labels", () => {
    const { svg } = renderChart(barSpec());
    expect(svg).toContain("distribution plot for the count of features");
    expect(svg).toContain('class="chart-title"');
    expect(svg).toContain(">extract</text>");
    expect(svg).toContain(">count</text>");
  });

  it("scales the tallest bar to the plot area", () => {
    const { svg } = renderChart(barSpec());
    // count=3 is the max; its bar height equals the full plot height (216)
    expect(svg).toContain('height="216.0"');
  });

  it("renders a histogram from a single numeric column", () => {
    const spec: ChartSpec = {
      spec_version: 1,
      chart_type: "histogram",
      x: "score",
      title: "score histogram",
      data: { csv: "x.csv" },
      series: [{ x: "0.1" }, { x: "0.2" }, { x: "0.9" }, { x: "0.95" }],
    };
    const { svg } = renderChart(spec);
    expect((svg as string).match(/<rect class="bar"/g)?.length).toBeGreaterThan(1);
  });

  it("renders scatter points and line paths", () => {
    const points = [
      { x: "1", y: "2" },
      { x: "2", y: "4" },
      { x: "3", y: "1" },
    ];
    const scatter = renderChart({ ...barSpec(), chart_type: "scatter", series: points });
    expect((scatter.svg as string).match(/<circle class="dot"/g)).toHaveLength(3);
    const line = renderChart({ ...barSpec(), chart_type: "line", series: points });
    expect(line.svg).toContain("<polyline");
  });

  it("falls back to raw JSON for unknown spec versions", () => {
    const spec = { ...barSpec(), spec_version: 99 };
    const { svg, fallback } = renderChart(spec);
    expect(svg).toBeNull();
    expect(fallback).toContain('"spec_version": 99');
  });

  it("builds series from CSV when none are inlined", () => {
    const spec = { ...barSpec(), series: undefined };
    const rows = [
      ["extract", "count"],
      ["A", "5"],
      ["B", "1"],
    ];
    const series = seriesFromCsv(spec, rows);
    expect(series).toEqual([
      { x: "A", y: "5" },
      { x: "B", y: "1" },
    ]);
  });

  it("rejects CSV missing the x column", () => {
    const spec = { ...barSpec(), series: undefined };
    expect(() => seriesFromCsv(spec, [["other"], ["v"]])).toThrow(/extract/);
  });

  it("escapes markup in titles", () => {
    const spec = { ...barSpec(), title: "a <b> & c" };
    const { svg } = renderChart(spec);
    expect(svg).toContain("a &lt;b&gt; &amp; c");
    expect(svg).not.toContain("<b>");
  });
});
