/** Deterministic SVG scene construction: fixed canvas, stable number
 * formatting, no timestamps or random ids, so output is text-diffable and
 * golden-testable. */

export const WIDTH = 720;
export const HEIGHT = 480;
export const MARGIN = { top: 40, right: 180, bottom: 56, left: 72 };

export const SERIES_COLORS = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
];

export function fmt(v: number): string {
  if (!Number.isFinite(v)) throw new Error(`non-finite coordinate ${v}`);
  const s = v.toFixed(2);
  return s === "-0.00" ? "0.00" : s;
}

export function fmtTick(v: number): string {
  if (v !== 0 && (Math.abs(v) < 1e-3 || Math.abs(v) >= 1e4)) {
    const exp = Math.floor(Math.log10(Math.abs(v)));
    const mant = v / 10 ** exp;
    const m = Math.abs(mant - 1) < 1e-9 ? "1" : mant.toPrecision(2);
    return `${m}e${exp}`;
  }
  return String(Math.abs(v) >= 1 || v === 0 ? Number(v.toPrecision(6)) : Number(v.toPrecision(3)));
}

export interface Scale {
  (v: number): number;
  ticks: number[];
}

export function linearScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  if (hi === lo) {
    lo -= 1;
    hi += 1;
  }
  const f = ((v: number) => outLo + ((v - lo) / (hi - lo)) * (outHi - outLo)) as Scale;
  const span = hi - lo;
  const rawStep = span / 5;
  const mag = 10 ** Math.floor(Math.log10(rawStep));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= 6) ?? 10 * mag;
  const ticks: number[] = [];
  for (let t = Math.ceil(lo / step) * step; t <= hi + 1e-9; t += step) {
    ticks.push(Number(t.toPrecision(12)));
  }
  f.ticks = ticks;
  return f;
}

export function logScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  if (lo <= 0) throw new Error("log scale requires positive domain");
  // snap the domain to whole decades so every tick lies inside the axes
  const llo = Math.floor(Math.log10(lo));
  const lhi = Math.ceil(Math.log10(hi === lo ? lo * 10 : hi));
  const span = Math.max(lhi - llo, 1);
  const f = ((v: number) => outLo + ((Math.log10(v) - llo) / span) * (outHi - outLo)) as Scale;
  const ticks: number[] = [];
  for (let e = llo; e <= llo + span; e += 1) ticks.push(10 ** e);
  f.ticks = ticks;
  return f;
}

export interface Series {
  label: string;
  points: { x: number; y: number; err?: number }[];
}

export interface FigureLayout {
  title: string;
  xLabel: string;
  yLabel: string;
  logY: boolean;
  stepped?: boolean;
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderFigure(layout: FigureLayout, series: Series[]): string {
  if (series.length === 0 || series.every((s) => s.points.length === 0)) {
    throw new Error("nothing to plot: empty selection");
  }
  const xs = series.flatMap((s) => s.points.map((p) => p.x));
  const ysRaw = series.flatMap((s) => s.points.map((p) => p.y));
  const plotX0 = MARGIN.left;
  const plotX1 = WIDTH - MARGIN.right;
  const plotY0 = HEIGHT - MARGIN.bottom;
  const plotY1 = MARGIN.top;

  const xScale = linearScale(Math.min(...xs), Math.max(...xs), plotX0, plotX1);
  let yScale: Scale;
  if (layout.logY) {
    const positive = ysRaw.filter((y) => y > 0);
    const floor = positive.length ? Math.min(...positive) : 1e-6;
    const top = positive.length ? Math.max(...positive) : 1;
    yScale = logScale(floor, top, plotY0, plotY1);
  } else {
    yScale = linearScale(Math.min(...ysRaw), Math.max(...ysRaw), plotY0, plotY1);
  }
  const clampY = (y: number) => (layout.logY && y <= 0 ? yScale.ticks[0] : y);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(
    `<text class="title" x="${fmt(WIDTH / 2)}" y="24" text-anchor="middle" font-size="16">${esc(layout.title)}</text>`,
  );

  // axes and grid
  parts.push(
    `<line x1="${fmt(plotX0)}" y1="${fmt(plotY0)}" x2="${fmt(plotX1)}" y2="${fmt(plotY0)}" stroke="black"/>`,
  );
  parts.push(
    `<line x1="${fmt(plotX0)}" y1="${fmt(plotY0)}" x2="${fmt(plotX0)}" y2="${fmt(plotY1)}" stroke="black"/>`,
  );
  for (const t of xScale.ticks) {
    const x = xScale(t);
    parts.push(`<line x1="${fmt(x)}" y1="${fmt(plotY0)}" x2="${fmt(x)}" y2="${fmt(plotY0 + 5)}" stroke="black"/>`);
    parts.push(
      `<text class="xtick" x="${fmt(x)}" y="${fmt(plotY0 + 20)}" text-anchor="middle" font-size="12">${esc(fmtTick(t))}</text>`,
    );
  }
  for (const t of yScale.ticks) {
    const y = yScale(t);
    parts.push(
      `<line x1="${fmt(plotX0)}" y1="${fmt(y)}" x2="${fmt(plotX1)}" y2="${fmt(y)}" stroke="#dddddd" stroke-dasharray="3,3"/>`,
    );
    parts.push(
      `<text class="ytick" x="${fmt(plotX0 - 8)}" y="${fmt(y + 4)}" text-anchor="end" font-size="12">${esc(fmtTick(t))}</text>`,
    );
  }
  parts.push(
    `<text class="xlabel" x="${fmt((plotX0 + plotX1) / 2)}" y="${fmt(HEIGHT - 14)}" text-anchor="middle" font-size="13">${esc(layout.xLabel)}</text>`,
  );
  parts.push(
    `<text class="ylabel" x="18" y="${fmt((plotY0 + plotY1) / 2)}" text-anchor="middle" font-size="13" transform="rotate(-90 18 ${fmt((plotY0 + plotY1) / 2)})">${esc(layout.yLabel)}</text>`,
  );

  series.forEach((s, i) => {
    const color = SERIES_COLORS[i % SERIES_COLORS.length];
    const pts = s.points.map((p) => ({ x: xScale(p.x), y: yScale(clampY(p.y)), raw: p }));
    let d = "";
    if (layout.stepped) {
      d = pts
        .map((p, j) => {
          if (j === 0) return `M ${fmt(p.x)} ${fmt(p.y)}`;
          return `H ${fmt(p.x)} V ${fmt(p.y)}`;
        })
        .join(" ");
    } else {
      d = pts.map((p, j) => `${j === 0 ? "M" : "L"} ${fmt(p.x)} ${fmt(p.y)}`).join(" ");
    }
    parts.push(`<path class="series" data-label="${esc(s.label)}" d="${d}" fill="none" stroke="${color}" stroke-width="1.8"/>`);
    for (const p of pts) {
      parts.push(`<circle cx="${fmt(p.x)}" cy="${fmt(p.y)}" r="3" fill="${color}"/>`);
      if (p.raw.err !== undefined && p.raw.err > 0) {
        const yLo = yScale(clampY(Math.max(p.raw.y - p.raw.err, layout.logY ? p.raw.y / 10 : -Infinity)));
        const yHi = yScale(clampY(p.raw.y + p.raw.err));
        parts.push(
          `<line class="errbar" x1="${fmt(p.x)}" y1="${fmt(yLo)}" x2="${fmt(p.x)}" y2="${fmt(yHi)}" stroke="${color}" stroke-width="1"/>`,
        );
      }
    }
    const ly = MARGIN.top + 16 * i;
    const lx = WIDTH - MARGIN.right + 12;
    parts.push(`<line x1="${fmt(lx)}" y1="${fmt(ly)}" x2="${fmt(lx + 22)}" y2="${fmt(ly)}" stroke="${color}" stroke-width="1.8"/>`);
    parts.push(
      `<text class="legend" x="${fmt(lx + 28)}" y="${fmt(ly + 4)}" font-size="12">${esc(s.label)}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
