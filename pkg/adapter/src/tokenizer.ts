/**
 * Deterministic whitespace tokenizer with question/instruction spans.
 *
 * The question span is delimited by the question/answer marker tokens
 * (markers included; clients drop them via the protected-token list), and
 * the first prompt line is reported as the instruction span. Token ids are
 * FNV-1a hashes offset past the reserved range so the mask token id can
 * never collide with content.
 */

import { WireToken, TokenizeResponse } from "./protocol.js";

export const MASK_TOKEN_ID = 3;
export const QUESTION_MARKER = "<|question|>";
export const ANSWER_MARKER = "<|answer|>";

export const DEFAULT_PROTECTED_TOKENS = [
  "#Audio",
  "<audio>",
  "<audio_padding>",
  ANSWER_MARKER,
  QUESTION_MARKER,
];

const CONTENT_ID_BASE = 16;
const CONTENT_ID_SPACE = 0x100000;

export function tokenIdFor(text: string): number {
  let hash = 0x811c9dc5;
  for (const byte of Buffer.from(text, "utf-8")) {
    hash ^= byte;
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return CONTENT_ID_BASE + (hash % CONTENT_ID_SPACE);
}

export function tokenize(text: string): TokenizeResponse {
  const surfaces = text.split(/\s+/).filter((s) => s.length > 0);
  const tokens: WireToken[] = surfaces.map((s) => ({ id: tokenIdFor(s), text: s }));
  const qStart = surfaces.indexOf(QUESTION_MARKER);
  const aIndex = qStart >= 0 ? surfaces.indexOf(ANSWER_MARKER, qStart) : -1;
  if (qStart < 0 || aIndex < 0) {
    return { tokens, question_span: [0, tokens.length], instruction_span: [0, 0] };
  }
  const firstLineTokens = text.split("\n", 1)[0].split(/\s+/).filter((s) => s.length > 0).length;
  return {
    tokens,
    question_span: [qStart, aIndex + 1],
    instruction_span: [0, Math.min(firstLineTokens, qStart)],
  };
}

const protectedIds = new Set(DEFAULT_PROTECTED_TOKENS.map(tokenIdFor));

/**
 * Positions a client may mask, reconstructed from bare token ids. Masked
 * tokens keep counting as maskable because the mask id is outside the
 * content id range.
 */
export function maskablePositions(tokenIds: number[]): number[] {
  const qId = tokenIdFor(QUESTION_MARKER);
  const aId = tokenIdFor(ANSWER_MARKER);
  const qStart = tokenIds.indexOf(qId);
  const aIndex = qStart >= 0 ? tokenIds.indexOf(aId, qStart + 1) : -1;
  const lo = qStart >= 0 && aIndex >= 0 ? qStart + 1 : 0;
  const hi = qStart >= 0 && aIndex >= 0 ? aIndex : tokenIds.length;
  const positions: number[] = [];
  for (let pos = lo; pos < hi; pos++) {
    if (!protectedIds.has(tokenIds[pos])) {
      positions.push(pos);
    }
  }
  return positions;
}
