/**
 * Application shell: navigation, data fetching, keyboard shortcuts.
 *
 * Kept separate from main.ts (which only reads the token and mounts) so the
 * whole shell can be driven in tests against a real or stubbed client.
 */

import { ApiError, ReviewClient } from './api';
import type { Mode, QueueItem, Status, TrajectoryDetail } from './api';
import { renderDetail, renderQueue, renderStats, showToast } from './views';

type View = 'queue' | 'detail' | 'stats';

export class ReviewApp {
  private view: View = 'queue';
  private items: QueueItem[] = [];
  private nextCursor: number | null = null;
  private filters: { status?: Status; mode?: Mode } = { status: 'pending' };
  private detail: TrajectoryDetail | null = null;
  private overwriteEnabled = false;
  private toasts: HTMLElement;

  constructor(
    private readonly client: ReviewClient,
    private readonly root: HTMLElement,
  ) {
    this.toasts = document.createElement('div');
    this.toasts.className = 'toasts';
    root.after(this.toasts);
    document.addEventListener('keydown', (event) => this.onKey(event));
    // Concurrent annotators coordinate purely through server state.
    window.addEventListener('focus', () => void this.refresh());
  }

  async start(): Promise<void> {
    const stats = await this.client.getStats();
    this.overwriteEnabled = stats.overwrite_enabled;
    await this.loadQueue();
  }

  // ── Navigation ──

  async loadQueue(): Promise<void> {
    const page = await this.client.listQueue({ ...this.filters, limit: 20 });
    this.items = page.items;
    this.nextCursor = page.next_cursor;
    this.view = 'queue';
    this.detail = null;
    this.render();
  }

  async loadMore(): Promise<void> {
    if (this.nextCursor == null) return;
    const page = await this.client.listQueue({
      ...this.filters,
      cursor: this.nextCursor,
      limit: 20,
    });
    this.items = [...this.items, ...page.items];
    this.nextCursor = page.next_cursor;
    this.render();
  }

  async open(id: string): Promise<void> {
    this.detail = await this.client.getTrajectory(id);
    this.view = 'detail';
    this.render();
  }

  async showStats(): Promise<void> {
    const stats = await this.client.getStats();
    this.overwriteEnabled = stats.overwrite_enabled;
    this.view = 'stats';
    this.render(stats);
  }

  async refresh(): Promise<void> {
    if (this.view === 'queue') await this.loadQueue();
    else if (this.view === 'detail' && this.detail) await this.open(this.detail.id);
    else if (this.view === 'stats') await this.showStats();
  }

  // ── Verdicts ──

  async submitVerdict(decision: 'accept' | 'reject', notes = ''): Promise<void> {
    if (!this.detail) return;
    const id = this.detail.id;
    const previous = this.detail.verification;
    // Optimistic paint; the server response (or a rollback) wins.
    this.detail = {
      ...this.detail,
      verification: { ...previous, status: decision === 'reject' ? 'rejected' : previous.status },
    };
    this.render();
    try {
      const verification = await this.client.submitVerdict(id, decision, notes);
      if (this.detail && this.detail.id === id) {
        this.detail = { ...this.detail, verification };
        this.render();
      }
    } catch (error) {
      if (this.detail && this.detail.id === id) {
        this.detail = { ...this.detail, verification: previous };
        this.render();
      }
      const message = error instanceof ApiError ? error.message : 'network failure';
      showToast(this.toasts, `Verdict failed: ${message}`, () =>
        void this.submitVerdict(decision, notes),
      );
    }
  }

  /** Advance to the next pending item after the current one, if any. */
  async next(): Promise<void> {
    const currentId = this.detail?.id;
    await this.loadQueue();
    const index = currentId ? this.items.findIndex((i) => i.id === currentId) : -1;
    const candidate = this.items.slice(index + 1).find((i) => i.status === 'pending');
    if (candidate) await this.open(candidate.id);
  }

  private onKey(event: KeyboardEvent): void {
    if (this.view !== 'detail' || !this.detail) return;
    const target = event.target as HTMLElement | null;
    if (target && target.tagName === 'TEXTAREA') return;
    const locked = this.detail.verification.status === 'rejected' && !this.overwriteEnabled;
    switch (event.key.toLowerCase()) {
      case 'a':
        if (!locked) void this.submitVerdict('accept');
        break;
      case 'r':
        if (!locked) void this.submitVerdict('reject');
        break;
      case 'n':
        void this.next();
        break;
    }
  }

  // ── Rendering ──

  private render(stats?: Parameters<typeof renderStats>[0]): void {
    this.root.replaceChildren();
    if (this.view === 'queue') {
      this.root.appendChild(
        renderQueue(this.items, this.nextCursor != null, {
          onOpen: (id) => void this.open(id),
          onFilterChange: (filters) => {
            this.filters = filters as { status?: Status; mode?: Mode };
            void this.loadQueue();
          },
          onLoadMore: () => void this.loadMore(),
        }),
      );
    } else if (this.view === 'detail' && this.detail) {
      this.root.appendChild(
        renderDetail(this.detail, this.overwriteEnabled, {
          onVerdict: (decision, notes) => void this.submitVerdict(decision, notes),
          onBack: () => void this.loadQueue(),
        }),
      );
    } else if (this.view === 'stats' && stats) {
      this.root.appendChild(renderStats(stats));
    }
  }
}
