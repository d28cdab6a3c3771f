import { afterEach, describe, expect, it, vi } from 'vitest';

import { ApiError, QueuePageSchema, ReviewClient, TrajectoryDetailSchema } from '../src/api';

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

const QUEUE_PAGE = {
  items: [
    {
      id: 't1',
      mode: 'direct',
      instruction: 'a cat',
      category: null,
      thumbnails: ['/images/abc'],
      status: 'pending',
    },
  ],
  next_cursor: 3,
};

afterEach(() => {
  vi.unstubAllGlobals();
});

describe('ReviewClient', () => {
  it('sends bearer token and filter params', async () => {
    const fetchMock = vi.fn().mockResolvedValue(jsonResponse(QUEUE_PAGE));
    vi.stubGlobal('fetch', fetchMock);
    const client = new ReviewClient('tok-a', 'http://x');

    const page = await client.listQueue({ status: 'pending', mode: 'direct', limit: 5 });

    expect(page.items[0]?.id).toBe('t1');
    const [url, init] = fetchMock.mock.calls[0] as [string, RequestInit];
    expect(url).toBe('http://x/api/trajectories?status=pending&mode=direct&limit=5');
    expect((init.headers as Record<string, string>).Authorization).toBe('Bearer tok-a');
  });

  it('propagates server error detail as ApiError', async () => {
    vi.stubGlobal(
      'fetch',
      vi.fn().mockResolvedValue(jsonResponse({ detail: 'trajectory already rejected' }, 409)),
    );
    const client = new ReviewClient('tok-a', 'http://x');

    await expect(client.submitVerdict('t1', 'accept')).rejects.toMatchObject({
      status: 409,
      message: 'trajectory already rejected',
    });
  });

  it('rejects payloads that do not match the contract', async () => {
    vi.stubGlobal('fetch', vi.fn().mockResolvedValue(jsonResponse({ items: 'nope' })));
    const client = new ReviewClient('tok-a', 'http://x');
    await expect(client.listQueue()).rejects.toThrow();
  });

  it('posts verdict notes verbatim', async () => {
    const verification = {
      trajectory_id: 't1',
      verdicts: [{ annotator_id: 'ann-a', decision: 'accept', notes: 'fine', timestamp: '' }],
      status: 'pending',
    };
    const fetchMock = vi.fn().mockResolvedValue(jsonResponse(verification));
    vi.stubGlobal('fetch', fetchMock);
    const client = new ReviewClient('tok-a', 'http://x');

    const result = await client.submitVerdict('t1', 'accept', 'fine');

    expect(result.status).toBe('pending');
    const [, init] = fetchMock.mock.calls[0] as [string, RequestInit];
    expect(JSON.parse(init.body as string)).toEqual({ decision: 'accept', notes: 'fine' });
  });
});

describe('schemas', () => {
  it('accepts a full queue page', () => {
    expect(QueuePageSchema.parse(QUEUE_PAGE).next_cursor).toBe(3);
  });

  it('rejects an unknown segment kind in detail payloads', () => {
    const detail = {
      id: 't1',
      mode: 'direct',
      instruction: 'x',
      references: [],
      segments: [{ kind: 'mystery', index: 1, payload: {} }],
      category: null,
      verification: { trajectory_id: 't1', verdicts: [], status: 'pending' },
      image_urls: {},
    };
    expect(() => TrajectoryDetailSchema.parse(detail)).toThrow();
  });
});
