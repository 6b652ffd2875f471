// DOM wiring for the console: run form, live pair table, pair charts.

import { fetchReport, launchRun, streamEvents, type RunForm } from './api.js';
import { applyEvent, chartData, emptyView, tableRows, type RunView } from './state.js';
import { renderChartSvg, renderStatusHtml, renderTableHtml } from './render.js';

const $ = <T extends HTMLElement>(sel: string): T => {
  const el = document.querySelector<T>(sel);
  if (!el) throw new Error(`missing element ${sel}`);
  return el;
};

const baseUrl = (): string => ($('#service-url') as HTMLInputElement).value.replace(/\/+$/, '');

let view: RunView = emptyView();
let currentRun: string | null = null;
let openChartPairId: number | null = null;
let abort: AbortController | null = null;
let reportR: Map<number, number | null> = new Map();

function redraw(): void {
  $('#status').innerHTML = renderStatusHtml(view);
  const sameSectorOnly = ($('#sector-filter') as HTMLInputElement).checked;
  $('#table').innerHTML = renderTableHtml(view, tableRows(view, sameSectorOnly));
  if (openChartPairId !== null) {
    const data = chartData(view, openChartPairId);
    if (data) {
      // prefer the backend report's r for the badge when it has arrived
      const reported = reportR.get(openChartPairId);
      if (reported !== undefined) data.pair = { ...data.pair, r: reported };
      $('#chart').innerHTML = renderChartSvg(data);
    }
  }
}

async function subscribe(runId: string): Promise<void> {
  abort?.abort();
  abort = new AbortController();
  view = emptyView();
  openChartPairId = null;
  reportR = new Map();
  currentRun = runId;
  redraw();
  const sameSectorOnly = ($('#sector-filter') as HTMLInputElement).checked;
  try {
    await streamEvents(baseUrl(), runId, { sameSectorOnly, follow: true, signal: abort.signal },
      (ev) => {
        applyEvent(view, ev);
        if (ev.event === 'classification_done') {
          void loadReport(runId);
        }
        redraw();
      });
  } catch (err) {
    if (!(err instanceof DOMException && err.name === 'AbortError')) {
      $('#status').innerHTML = `<p class="error">stream closed: ${String(err)}</p>`;
    }
  }
}

async function loadReport(runId: string): Promise<void> {
  try {
    const report = await fetchReport(baseUrl(), runId);
    reportR = new Map(
      report.pairs.map((p) => [p.pair_id as number, p.r as number | null]),
    );
    redraw();
  } catch {
    // report may not be persisted yet; the pair events already carry r
  }
}

function formFromInputs(): RunForm {
  const num = (sel: string) => Number(($(sel) as HTMLInputElement).value);
  return {
    synthetic: {
      seed: num('#seed'),
      nSeries: num('#series'),
      groups: Array.from({ length: num('#groups') }, () => [2, num('#group-sigma')] as [number, number]),
      nSteps: num('#ticks'),
      baseVolatility: num('#sigma'),
    },
    interval: num('#interval'),
    samples: num('#samples'),
    minSupport: num('#min-support'),
    complexityPenalty: num('#penalty'),
    pairMode: ($('#pair-mode') as HTMLSelectElement).value as 'best' | 'mutual',
    minCounter: num('#min-counter'),
    sameSectorOnly: ($('#sector-filter') as HTMLInputElement).checked,
  };
}

export function wireUp(): void {
  $('#launch').addEventListener('click', () => {
    const form = formFromInputs();
    $('#form-errors').textContent = '';
    launchRun(baseUrl(), form)
      .then((runId) => subscribe(runId))
      .catch((err) => {
        $('#form-errors').textContent = String(err instanceof Error ? err.message : err);
      });
  });
  $('#sector-filter').addEventListener('change', () => {
    // the filter lives in the stream subscription, not in the table
    if (currentRun) void subscribe(currentRun);
  });
  $('#watch').addEventListener('click', () => {
    const runId = ($('#run-id') as HTMLInputElement).value.trim();
    if (runId) void subscribe(runId);
  });
  $('#table').addEventListener('click', (evt) => {
    const row = (evt.target as HTMLElement).closest<HTMLElement>('tr[data-pair-id]');
    if (row) {
      openChartPairId = Number(row.dataset.pairId);
      redraw();
    }
  });
}

if (typeof document !== 'undefined' && document.readyState !== 'loading') {
  wireUp();
} else if (typeof document !== 'undefined') {
  document.addEventListener('DOMContentLoaded', wireUp);
}
