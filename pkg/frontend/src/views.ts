/**
 * DOM rendering for the three views (queue, detail, stats).
 *
 * Render functions are pure: data and callbacks in, detached elements out.
 * The router in main.ts owns mounting, navigation, and server round-trips,
 * which keeps everything here unit-testable under jsdom.
 */

import type { QueueItem, Segment, Stats, Status, TrajectoryDetail } from './api';

export const PASS_THRESHOLD = 4;

/** Mode share targets: direct : reflection : multi_step = 1 : 2 : 2. */
const MODE_TARGETS: Record<string, number> = {
  direct: 1 / 5,
  reflection: 2 / 5,
  multi_step: 2 / 5,
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = '',
  text = '',
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

// ── Queue ───────────────────────────────────────────────────────────

export interface QueueCallbacks {
  onOpen: (id: string) => void;
  onFilterChange: (filters: { status?: Status; mode?: string }) => void;
  onLoadMore: () => void;
}

export function renderQueue(
  items: QueueItem[],
  hasMore: boolean,
  callbacks: QueueCallbacks,
): HTMLElement {
  const root = el('div', 'queue-view');

  const bar = el('div', 'filter-bar');
  const statusSelect = el('select', 'filter-status');
  for (const value of ['', 'pending', 'retained', 'rejected']) {
    const option = el('option', '', value || 'all statuses');
    option.value = value;
    statusSelect.appendChild(option);
  }
  const modeSelect = el('select', 'filter-mode');
  for (const value of ['', 'direct', 'reflection', 'multi_step', 'filtered']) {
    const option = el('option', '', value || 'all modes');
    option.value = value;
    modeSelect.appendChild(option);
  }
  const emitFilters = () =>
    callbacks.onFilterChange({
      status: (statusSelect.value || undefined) as Status | undefined,
      mode: modeSelect.value || undefined,
    });
  statusSelect.addEventListener('change', emitFilters);
  modeSelect.addEventListener('change', emitFilters);
  bar.append(statusSelect, modeSelect);
  root.appendChild(bar);

  const list = el('ul', 'queue-list');
  for (const item of items) {
    const row = el('li', `queue-item status-${item.status}`);
    row.dataset.id = item.id;
    const thumbs = el('div', 'thumbs');
    for (const url of item.thumbnails.slice(0, 3)) {
      const img = el('img', 'thumb');
      img.loading = 'lazy';
      img.src = url;
      thumbs.appendChild(img);
    }
    row.appendChild(thumbs);
    row.appendChild(el('span', 'mode-tag', item.mode));
    row.appendChild(el('span', 'instruction', item.instruction));
    row.appendChild(el('span', `status-badge status-${item.status}`, item.status));
    row.addEventListener('click', () => callbacks.onOpen(item.id));
    list.appendChild(row);
  }
  if (items.length === 0) {
    list.appendChild(el('li', 'empty', 'No trajectories match the current filters.'));
  }
  root.appendChild(list);

  if (hasMore) {
    const more = el('button', 'load-more', 'Load more');
    more.addEventListener('click', callbacks.onLoadMore);
    root.appendChild(more);
  }
  return root;
}

// ── Detail ──────────────────────────────────────────────────────────

export interface DetailCallbacks {
  onVerdict: (decision: 'accept' | 'reject', notes: string) => void;
  onBack: () => void;
}

function scoreBadges(scores: Record<string, number>): HTMLElement {
  const wrap = el('span', 'score-badges');
  for (const [criterion, value] of Object.entries(scores)) {
    const badge = el(
      'span',
      value < PASS_THRESHOLD ? 'score-badge low' : 'score-badge',
      `${criterion} ${value}`,
    );
    badge.dataset.criterion = criterion;
    wrap.appendChild(badge);
  }
  return wrap;
}

function segmentRow(segment: Segment, imageUrls: Record<string, string>): HTMLElement {
  const row = el('div', `segment segment-${segment.kind}`);
  row.dataset.kind = segment.kind;
  row.dataset.index = String(segment.index);
  row.appendChild(el('span', 'segment-label', `${segment.kind[0]?.toUpperCase()}${segment.index}`));

  switch (segment.kind) {
    case 'generation': {
      const img = el('img', 'generation-image');
      img.loading = 'lazy';
      img.src = imageUrls[segment.payload.content_hash] ?? segment.payload.uri;
      row.appendChild(img);
      break;
    }
    case 'evaluation': {
      row.appendChild(scoreBadges(segment.payload.scores));
      row.appendChild(
        el('span', segment.payload.pass ? 'verdict pass' : 'verdict fail',
          segment.payload.pass ? 'pass' : 'fail'),
      );
      if (segment.payload.rationale) {
        row.appendChild(el('p', 'rationale', segment.payload.rationale));
      }
      break;
    }
    case 'reflection': {
      row.appendChild(el('p', 'failure-analysis', segment.payload.failure_analysis));
      row.appendChild(el('p', 'improvement-plan', segment.payload.improvement_plan));
      break;
    }
    case 'sub_instruction': {
      row.appendChild(el('p', 'sub-instruction', segment.payload.text));
      break;
    }
  }
  return row;
}

export function renderDetail(
  detail: TrajectoryDetail,
  overwriteEnabled: boolean,
  callbacks: DetailCallbacks,
): HTMLElement {
  const root = el('div', 'detail-view');
  const back = el('button', 'back', '← queue');
  back.addEventListener('click', callbacks.onBack);
  root.appendChild(back);

  const header = el('header', 'detail-header');
  header.appendChild(el('h2', 'instruction', detail.instruction));
  header.appendChild(el('span', 'mode-tag', detail.mode));
  if (detail.category) header.appendChild(el('span', 'category', detail.category));
  if (detail.mode === 'multi_step') {
    const raw = detail.segments.some((s) => s.kind === 'reflection');
    header.appendChild(el('span', 'prune-tag', raw ? 'raw trace' : 'pruned'));
  }
  header.appendChild(
    el('span', `status-badge status-${detail.verification.status}`, detail.verification.status),
  );
  root.appendChild(header);

  if (detail.references.length > 0) {
    const refs = el('div', 'references');
    refs.appendChild(el('h3', '', 'References'));
    for (const ref of detail.references) {
      const img = el('img', 'reference-image');
      img.loading = 'lazy';
      img.src = detail.image_urls[ref.content_hash] ?? ref.uri;
      refs.appendChild(img);
    }
    root.appendChild(refs);
  }

  const chain = el('div', 'segment-chain');
  // Render in payload order exactly — no client-side reordering.
  for (const segment of detail.segments) {
    chain.appendChild(segmentRow(segment, detail.image_urls));
  }
  root.appendChild(chain);

  const panel = el('div', 'verdict-panel');
  const notes = el('textarea', 'notes');
  notes.placeholder = 'Notes (optional)';
  const accept = el('button', 'accept', 'Accept (A)');
  const reject = el('button', 'reject', 'Reject (R)');
  const locked = detail.verification.status === 'rejected' && !overwriteEnabled;
  accept.disabled = locked;
  reject.disabled = locked;
  accept.addEventListener('click', () => callbacks.onVerdict('accept', notes.value));
  reject.addEventListener('click', () => callbacks.onVerdict('reject', notes.value));
  panel.append(notes, accept, reject);
  root.appendChild(panel);

  const verdictsList = el('ul', 'verdict-log');
  for (const verdict of detail.verification.verdicts) {
    verdictsList.appendChild(
      el('li', `logged-verdict ${verdict.decision}`,
        `${verdict.annotator_id}: ${verdict.decision}${verdict.notes ? ` — ${verdict.notes}` : ''}`),
    );
  }
  root.appendChild(verdictsList);
  return root;
}

// ── Stats ───────────────────────────────────────────────────────────

export function renderStats(stats: Stats): HTMLElement {
  const root = el('div', 'stats-view');
  root.appendChild(el('h2', '', `Dataset: ${stats.total} trajectories`));

  const modes = el('table', 'mode-table');
  const head = el('tr');
  for (const label of ['mode', 'count', 'share', 'target']) head.appendChild(el('th', '', label));
  modes.appendChild(head);
  for (const [mode, target] of Object.entries(MODE_TARGETS)) {
    const count = stats.mode_counts[mode] ?? 0;
    const share = stats.total > 0 ? count / stats.total : 0;
    const row = el('tr', 'mode-row');
    row.dataset.mode = mode;
    row.appendChild(el('td', '', mode));
    row.appendChild(el('td', 'count', String(count)));
    row.appendChild(el('td', 'share', `${(share * 100).toFixed(1)}%`));
    row.appendChild(el('td', 'target', `${(target * 100).toFixed(1)}%`));
    modes.appendChild(row);
  }
  root.appendChild(modes);
  if (stats.mode_ratio_deviation != null) {
    root.appendChild(
      el('p', 'ratio-deviation',
        `Max deviation from 1:2:2 target: ${(stats.mode_ratio_deviation * 100).toFixed(1)}%`),
    );
  }

  const funnel = el('ul', 'retention-funnel');
  for (const stage of ['pending', 'retained', 'rejected']) {
    const item = el('li', `funnel-${stage}`, `${stage}: ${stats.verification_counts[stage] ?? 0}`);
    funnel.appendChild(item);
  }
  root.appendChild(funnel);
  return root;
}

// ── Toasts ──────────────────────────────────────────────────────────

export function showToast(
  container: HTMLElement,
  message: string,
  retry?: () => void,
): HTMLElement {
  const toast = el('div', 'toast', message);
  if (retry) {
    const button = el('button', 'toast-retry', 'Retry');
    button.addEventListener('click', () => {
      toast.remove();
      retry();
    });
    toast.appendChild(button);
  } else {
    setTimeout(() => toast.remove(), 5000);
  }
  container.appendChild(toast);
  return toast;
}
