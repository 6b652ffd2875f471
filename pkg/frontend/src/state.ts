// Run view state, folded purely from the event stream. Reloading and
// replaying the same events reconstructs the identical view: there is no
// other state and no computation here beyond copying event fields.

import type { PairEvent, RunEvent } from './events.js';

export interface SymbolState {
  sector: string;
  price: number | null;
  pctSinceStart: number | null;
  history: Array<{ timestamp: number; price: number; pctSinceStart: number }>;
}

export interface PairRow {
  pairId: number;
  a: string;
  b: string;
  counter: number;
  r: number | null;
  sectorA: string;
  sectorB: string;
  sameSector: boolean;
}

export interface RunView {
  runId: string | null;
  nSamples: number | null;
  samplesTaken: number;
  classification: { nSeries: number; nNodes: number; nPairs: number } | null;
  pairs: Map<number, PairRow>;
  symbols: Map<string, SymbolState>;
  failed: string | null;
  streamError: string | null;
}

export function emptyView(): RunView {
  return {
    runId: null,
    nSamples: null,
    samplesTaken: 0,
    classification: null,
    pairs: new Map(),
    symbols: new Map(),
    failed: null,
    streamError: null,
  };
}

function pairRow(ev: PairEvent): PairRow {
  return {
    pairId: ev.pair_id,
    a: ev.a,
    b: ev.b,
    counter: ev.counter,
    r: ev.r,
    sectorA: ev.sector_a,
    sectorB: ev.sector_b,
    sameSector: ev.sector_a === ev.sector_b,
  };
}

export function applyEvent(view: RunView, ev: RunEvent): RunView {
  switch (ev.event) {
    case 'run_started':
      view.runId = ev.run_id;
      view.nSamples = ev.n_samples;
      break;
    case 'sample_taken':
      view.samplesTaken = ev.index;
      break;
    case 'classification_done':
      view.classification = { nSeries: ev.n_series, nNodes: ev.n_nodes, nPairs: ev.n_pairs };
      break;
    case 'pair': {
      view.pairs.set(ev.pair_id, pairRow(ev));
      for (const [symbol, sector] of [[ev.a, ev.sector_a], [ev.b, ev.sector_b]] as const) {
        if (!view.symbols.has(symbol)) {
          view.symbols.set(symbol, { sector, price: null, pctSinceStart: null, history: [] });
        }
      }
      break;
    }
    case 'price': {
      const sym = view.symbols.get(ev.symbol);
      if (sym) {
        sym.price = ev.price;
        sym.pctSinceStart = ev.pct_since_start;
        sym.history.push({
          timestamp: ev.timestamp,
          price: ev.price,
          pctSinceStart: ev.pct_since_start,
        });
      }
      break;
    }
    case 'run_failed':
      view.failed = ev.reason;
      break;
    case 'error':
      view.streamError = ev.reason;
      break;
  }
  return view;
}

export function foldEvents(events: Iterable<RunEvent>): RunView {
  const view = emptyView();
  for (const ev of events) applyEvent(view, ev);
  return view;
}

export function tableRows(view: RunView, sameSectorOnly: boolean): PairRow[] {
  const rows = [...view.pairs.values()].filter((p) => !sameSectorOnly || p.sameSector);
  return rows.sort((x, y) => x.pairId - y.pairId);
}

export interface ChartData {
  pair: PairRow;
  series: Array<{
    symbol: string;
    sector: string;
    points: Array<{ timestamp: number; price: number; pctSinceStart: number }>;
  }>;
}

export function chartData(view: RunView, pairId: number): ChartData | null {
  const pair = view.pairs.get(pairId);
  if (!pair) return null;
  const series = [pair.a, pair.b].map((symbol) => {
    const st = view.symbols.get(symbol);
    return { symbol, sector: st?.sector ?? '', points: st ? [...st.history] : [] };
  });
  return { pair, series };
}
