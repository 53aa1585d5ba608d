/**
 * Wire types for the /v1 masked-inference protocol.
 *
 * Audio travels as base64-encoded little-endian float32 mono PCM at the
 * server's declared sample rate; masking happens client-side, so every
 * request carries fully materialized inputs.
 */

export interface DescribeResponse {
  model_id: string;
  sample_rate_hz: number;
  max_audio_seconds: number | null;
  mask_token_id: number;
  protected_tokens: string[];
  max_batch: number;
  logit_tolerance: number;
}

export interface WireToken {
  id: number;
  text: string;
}

export interface TokenizeResponse {
  tokens: WireToken[];
  question_span: [number, number];
  instruction_span: [number, number];
}

export interface GenerateRequest {
  audio_f32_b64: string;
  token_ids: number[];
  greedy: boolean;
}

export interface GenerateResponse {
  answer_token_ids: number[];
  answer_positions: number[];
  answer_logits: number[];
  answer_text: string;
}

export interface ScoreVariant {
  audio_f32_b64: string;
  token_ids: number[];
}

export interface ScoreRequest {
  variants: ScoreVariant[];
  answer_token_ids: number[];
  answer_positions: number[];
}

export interface ScoreResponse {
  logits: number[][];
}

export interface ErrorBody {
  error: { code: string; message: string };
}

/** Request rejected with a protocol error body. */
export class BadRequestError extends Error {
  constructor(message: string, readonly code: string = "bad_request") {
    super(message);
  }
}

export function decodeAudio(b64: string): Float64Array {
  let buf: Buffer;
  try {
    buf = Buffer.from(b64, "base64");
  } catch {
    throw new BadRequestError("audio_f32_b64 is not valid base64");
  }
  if (buf.length % 4 !== 0) {
    throw new BadRequestError(`audio payload of ${buf.length} bytes is not float32-aligned`);
  }
  const samples = new Float64Array(buf.length / 4);
  for (let i = 0; i < samples.length; i++) {
    samples[i] = buf.readFloatLE(4 * i);
  }
  return samples;
}

export function requireIntArray(value: unknown, field: string): number[] {
  if (!Array.isArray(value) || !value.every((x) => Number.isInteger(x))) {
    throw new BadRequestError(`field '${field}' must be a list of integers`);
  }
  return value as number[];
}

export function requireString(value: unknown, field: string): string {
  if (typeof value !== "string") {
    throw new BadRequestError(`field '${field}' must be a string`);
  }
  return value;
}
