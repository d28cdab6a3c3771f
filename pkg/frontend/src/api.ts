/**
 * Typed client for the review service JSON API.
 *
 * Every response is validated with zod before it reaches the UI, so a
 * drifting server contract fails loudly instead of rendering garbage.
 */

import { z } from 'zod';

// ── Schemas ─────────────────────────────────────────────────────────

export const ModeSchema = z.enum(['direct', 'reflection', 'multi_step', 'filtered']);
export type Mode = z.infer<typeof ModeSchema>;

export const StatusSchema = z.enum(['pending', 'retained', 'rejected']);
export type Status = z.infer<typeof StatusSchema>;

export const QueueItemSchema = z.object({
  id: z.string(),
  mode: ModeSchema,
  instruction: z.string(),
  category: z.string().nullable(),
  thumbnails: z.array(z.string()),
  status: StatusSchema,
});
export type QueueItem = z.infer<typeof QueueItemSchema>;

export const QueuePageSchema = z.object({
  items: z.array(QueueItemSchema),
  next_cursor: z.number().int().nullable(),
});
export type QueuePage = z.infer<typeof QueuePageSchema>;

export const ScoresSchema = z.object({
  instruction: z.number().int(),
  consistency: z.number().int(),
  quality: z.number().int(),
  knowledge: z.number().int(),
});
export type Scores = z.infer<typeof ScoresSchema>;

const ImagePayload = z.object({ uri: z.string(), content_hash: z.string() });

const EvaluationPayload = z.object({
  scores: ScoresSchema,
  pass: z.boolean(),
  rationale: z.string(),
  failure_cause: z.string().nullable(),
});

const ReflectionPayload = z.object({
  failure_analysis: z.string(),
  improvement_plan: z.string(),
});

const TextPayload = z.object({ text: z.string() });

export const SegmentSchema = z.discriminatedUnion('kind', [
  z.object({ kind: z.literal('generation'), index: z.number().int(), payload: ImagePayload }),
  z.object({ kind: z.literal('evaluation'), index: z.number().int(), payload: EvaluationPayload }),
  z.object({ kind: z.literal('reflection'), index: z.number().int(), payload: ReflectionPayload }),
  z.object({ kind: z.literal('sub_instruction'), index: z.number().int(), payload: TextPayload }),
]);
export type Segment = z.infer<typeof SegmentSchema>;

export const VerificationSchema = z.object({
  trajectory_id: z.string(),
  verdicts: z.array(
    z.object({
      annotator_id: z.string(),
      decision: z.enum(['accept', 'reject']),
      notes: z.string(),
      timestamp: z.string(),
    }),
  ),
  status: StatusSchema,
});
export type Verification = z.infer<typeof VerificationSchema>;

export const TrajectoryDetailSchema = z.object({
  id: z.string(),
  mode: ModeSchema,
  instruction: z.string(),
  references: z.array(ImagePayload),
  segments: z.array(SegmentSchema),
  category: z.string().nullable(),
  failure_cause: z.string().nullable().optional(),
  verification: VerificationSchema,
  image_urls: z.record(z.string()),
});
export type TrajectoryDetail = z.infer<typeof TrajectoryDetailSchema>;

export const StatsSchema = z.object({
  total: z.number().int(),
  mode_counts: z.record(z.number().int()),
  category_counts: z.record(z.number().int()),
  verification_counts: z.record(z.number().int()),
  mode_ratio_deviation: z.number().nullable(),
  overwrite_enabled: z.boolean(),
});
export type Stats = z.infer<typeof StatsSchema>;

// ── Client ──────────────────────────────────────────────────────────

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export interface QueueFilters {
  status?: Status;
  mode?: Mode;
  cursor?: number | null;
  limit?: number;
}

export class ReviewClient {
  constructor(
    private readonly token: string,
    private readonly baseUrl = '',
  ) {}

  private async request(path: string, init: RequestInit = {}): Promise<unknown> {
    const res = await fetch(this.baseUrl + path, {
      ...init,
      headers: {
        Authorization: `Bearer ${this.token}`,
        'Content-Type': 'application/json',
        ...(init.headers ?? {}),
      },
    });
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const body = await res.json();
        if (typeof body.detail === 'string') detail = body.detail;
      } catch {
        // Non-JSON error body; keep the status text.
      }
      throw new ApiError(res.status, detail);
    }
    return res.json();
  }

  async listQueue(filters: QueueFilters = {}): Promise<QueuePage> {
    const params = new URLSearchParams();
    if (filters.status) params.set('status', filters.status);
    if (filters.mode) params.set('mode', filters.mode);
    if (filters.cursor != null) params.set('cursor', String(filters.cursor));
    if (filters.limit != null) params.set('limit', String(filters.limit));
    const query = params.toString();
    const raw = await this.request(`/api/trajectories${query ? `?${query}` : ''}`);
    return QueuePageSchema.parse(raw);
  }

  async getTrajectory(id: string): Promise<TrajectoryDetail> {
    const raw = await this.request(`/api/trajectories/${encodeURIComponent(id)}`);
    return TrajectoryDetailSchema.parse(raw);
  }

  async submitVerdict(
    id: string,
    decision: 'accept' | 'reject',
    notes = '',
  ): Promise<Verification> {
    const raw = await this.request(`/api/trajectories/${encodeURIComponent(id)}/verdict`, {
      method: 'POST',
      body: JSON.stringify({ decision, notes }),
    });
    return VerificationSchema.parse(raw);
  }

  async getStats(): Promise<Stats> {
    return StatsSchema.parse(await this.request('/api/stats'));
  }
}
