/**
 * Round-trip test against a live review service.
 *
 * Spawns the real Python backend over a freshly generated mock dataset,
 * then drives the app the way two annotators would: load the queue, open
 * a trajectory, submit Accept from two sessions, and observe "retained".
 */

import { spawn, type ChildProcess } from 'node:child_process';
import path from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ReviewClient } from '../src/api';
import { ReviewApp } from '../src/app';

const PORT = 8917;
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;

async function waitForReady(client: ReviewClient, attempts = 100): Promise<void> {
  for (let i = 0; i < attempts; i++) {
    try {
      await client.getStats();
      return;
    } catch {
      await new Promise((resolve) => setTimeout(resolve, 200));
    }
  }
  throw new Error('review service did not come up');
}

beforeAll(async () => {
  const fixture = path.resolve(process.cwd(), 'tests', 'fixtures', 'serve_fixture.py');
  server = spawn('python3', [fixture, '--port', String(PORT)], { stdio: 'inherit' });
  await waitForReady(new ReviewClient('tok-a', BASE));
}, 60000);

afterAll(() => {
  server?.kill();
});

describe('two-annotator consensus round-trip', () => {
  it('retains a trajectory after Accept from two sessions', async () => {
    const sessionA = new ReviewClient('tok-a', BASE);
    const sessionB = new ReviewClient('tok-b', BASE);

    // Session A loads the queue and opens the first pending trajectory.
    const page = await sessionA.listQueue({ status: 'pending' });
    expect(page.items.length).toBeGreaterThan(0);
    const first = page.items[0]!;
    const detail = await sessionA.getTrajectory(first.id);
    expect(detail.segments.length).toBeGreaterThan(0);
    expect(detail.verification.status).toBe('pending');

    const afterA = await sessionA.submitVerdict(first.id, 'accept', 'looks right');
    expect(afterA.status).toBe('pending'); // one accept is not consensus

    const afterB = await sessionB.submitVerdict(first.id, 'accept');
    expect(afterB.status).toBe('retained');

    // Both sessions observe the retained state after refresh.
    const refreshedA = await sessionA.getTrajectory(first.id);
    const refreshedB = await sessionB.getTrajectory(first.id);
    expect(refreshedA.verification.status).toBe('retained');
    expect(refreshedB.verification.status).toBe('retained');
  });

  it('drives the same flow through the app shell in a DOM', async () => {
    const root = document.createElement('main');
    document.body.appendChild(root);
    const app = new ReviewApp(new ReviewClient('tok-a', BASE), root);
    await app.start();

    // Pick a still-pending row from the rendered queue and open it.
    const row = root.querySelector('.queue-item.status-pending') as HTMLElement | null;
    expect(row).not.toBeNull();
    const id = row!.dataset.id!;
    await app.open(id);
    expect(root.querySelector('.segment-chain')).not.toBeNull();

    // Accept from the DOM session, then from a second headless session.
    await app.submitVerdict('accept');
    const sessionB = new ReviewClient('tok-b', BASE);
    const after = await sessionB.submitVerdict(id, 'accept');
    expect(after.status).toBe('retained');

    // The DOM session sees "retained" after refresh.
    await app.refresh();
    expect(root.querySelector('.detail-header .status-badge')?.textContent).toBe('retained');
  });

  it('reflects mode distribution in the stats payload', async () => {
    const stats = await new ReviewClient('tok-a', BASE).getStats();
    expect(stats.total).toBe(3);
    expect(stats.mode_counts).toMatchObject({ direct: 1, reflection: 1, multi_step: 1 });
  });
});
