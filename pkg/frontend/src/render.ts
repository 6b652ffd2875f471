// HTML/SVG string builders. Pure display formatting: every number shown
// comes from one event or report field.

import type { ChartData, PairRow, RunView } from './state.js';

export function fmtPrice(value: number | null): string {
  return value === null ? '—' : value.toFixed(2);
}

export function fmtPct(value: number | null): string {
  if (value === null) return '—';
  const sign = value > 0 ? '+' : '';
  return `${sign}${value.toFixed(2)}%`;
}

export function fmtR(value: number | null): string {
  return value === null ? 'n/a' : value.toFixed(2);
}

function esc(text: string): string {
  return text.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');
}

function sideCells(view: RunView, symbol: string, sector: string): string {
  const st = view.symbols.get(symbol);
  return (
    `<td class="sym">${esc(symbol)}</td>` +
    `<td class="num">${fmtPrice(st?.price ?? null)}</td>` +
    `<td class="num ${pctClass(st?.pctSinceStart ?? null)}">${fmtPct(st?.pctSinceStart ?? null)}</td>` +
    `<td>${esc(sector)}</td>`
  );
}

function pctClass(value: number | null): string {
  if (value === null || value === 0) return '';
  return value > 0 ? 'up' : 'down';
}

export function renderTableHtml(view: RunView, rows: PairRow[]): string {
  const header =
    '<tr><th>#</th><th>r</th><th>count</th>' +
    '<th>symbol</th><th>price</th><th>since start</th><th>sector</th>' +
    '<th>symbol</th><th>price</th><th>since start</th><th>sector</th></tr>';
  const body = rows
    .map(
      (p) =>
        `<tr data-pair-id="${p.pairId}" class="pair-row${p.sameSector ? ' same-sector' : ''}">` +
        `<td class="num">${p.pairId}</td>` +
        `<td class="num">${fmtR(p.r)}</td>` +
        `<td class="num">${p.counter}</td>` +
        sideCells(view, p.a, p.sectorA) +
        sideCells(view, p.b, p.sectorB) +
        '</tr>',
    )
    .join('');
  return `<table class="pairs">${header}${body}</table>`;
}

export function renderStatusHtml(view: RunView): string {
  if (view.streamError) return `<p class="error">stream error: ${esc(view.streamError)}</p>`;
  if (view.failed) return `<p class="error">run failed: ${esc(view.failed)}</p>`;
  const bits: string[] = [];
  if (view.runId) bits.push(`run <code>${esc(view.runId)}</code>`);
  if (view.nSamples !== null) bits.push(`samples ${view.samplesTaken}/${view.nSamples}`);
  if (view.classification) {
    bits.push(
      `${view.classification.nSeries} series, ${view.classification.nNodes} nodes, ` +
      `${view.classification.nPairs} pairs`,
    );
  }
  return `<p class="status">${bits.join(' · ') || 'no run yet'}</p>`;
}

// Dual-series chart as an inline SVG; both trajectories are drawn in
// percent-since-start so perfectly coupled series overlap visually.
export function renderChartSvg(data: ChartData, width = 640, height = 280): string {
  const pad = 34;
  const points = data.series.flatMap((s) => s.points);
  if (!points.length) {
    return `<svg width="${width}" height="${height}"><text x="12" y="24">no prices yet</text></svg>`;
  }
  const ts = points.map((p) => p.timestamp);
  const ps = points.map((p) => p.pctSinceStart);
  const t0 = Math.min(...ts);
  const t1 = Math.max(...ts);
  const p0 = Math.min(...ps, 0);
  const p1 = Math.max(...ps, 0);
  const sx = (t: number) => pad + ((t - t0) / (t1 - t0 || 1)) * (width - 2 * pad);
  const sy = (p: number) => height - pad - ((p - p0) / (p1 - p0 || 1)) * (height - 2 * pad);
  const colors = ['#2563eb', '#dc2626'];
  const polylines = data.series
    .map((s, i) => {
      const pts = s.points.map((p) => `${sx(p.timestamp).toFixed(1)},${sy(p.pctSinceStart).toFixed(1)}`).join(' ');
      return `<polyline fill="none" stroke="${colors[i % colors.length]}" stroke-width="1.5" points="${pts}"/>`;
    })
    .join('');
  const zero = sy(0);
  const legend = data.series
    .map((s, i) => `<tspan fill="${colors[i % colors.length]}">${esc(s.symbol)}</tspan>`)
    .join('<tspan> / </tspan>');
  const badge = `r = ${fmtR(data.pair.r)}`;
  return (
    `<svg width="${width}" height="${height}" class="pair-chart" data-pair-id="${data.pair.pairId}">` +
    `<line x1="${pad}" y1="${zero.toFixed(1)}" x2="${width - pad}" y2="${zero.toFixed(1)}" stroke="#999" stroke-dasharray="4 3"/>` +
    polylines +
    `<text x="${pad}" y="18">${legend}<tspan> · </tspan><tspan class="r-badge">${badge}</tspan></text>` +
    '</svg>'
  );
}
