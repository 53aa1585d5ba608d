/**
 * Checkpoint abstraction behind the /v1 adapter.
 *
 * A checkpoint owns tokenization, greedy generation, and teacher-forced
 * scoring of masked input variants. Real checkpoints wrap model runtimes;
 * the built-in "toy" checkpoint is a deterministic closed-form scorer that
 * responds to both modalities, so the adapter's protocol behavior can be
 * exercised end to end without model weights.
 */

import { GenerateResponse, TokenizeResponse } from "./protocol.js";
import {
  DEFAULT_PROTECTED_TOKENS,
  MASK_TOKEN_ID,
  maskablePositions,
  tokenIdFor,
  tokenize,
} from "./tokenizer.js";

export interface AdapterConfig {
  checkpoint: string;
  device: string;
  host: string;
  port: number;
  sample_rate_hz: number;
  max_audio_seconds: number | null;
  mask_token_id: number;
  protected_tokens: string[];
  max_batch: number;
  logit_tolerance: number;
}

export const DEFAULT_CONFIG: AdapterConfig = {
  checkpoint: "toy",
  device: "cpu",
  host: "127.0.0.1",
  port: 8978,
  sample_rate_hz: 16000,
  max_audio_seconds: 30,
  mask_token_id: MASK_TOKEN_ID,
  protected_tokens: DEFAULT_PROTECTED_TOKENS,
  max_batch: 64,
  logit_tolerance: 1e-9,
};

export interface Checkpoint {
  modelId: string;
  tokenize(text: string): TokenizeResponse;
  /** Greedy generation on the unmasked input; empty answers are a checkpoint bug. */
  generate(samples: Float64Array, tokenIds: number[]): GenerateResponse;
  /** Teacher-forced logits of the fixed answer tokens under one masked variant. */
  score(
    samples: Float64Array,
    tokenIds: number[],
    answerTokenIds: number[],
    answerPositions: number[],
  ): number[];
}

const ANSWER_WORDS = ["Doorbell", "Horn", "Whistle", "Applause"];
const LETTERS = ["A", "B", "C", "D"];

/** Stable pseudo-weight in [0.1, 1.0) derived from a token id. */
function unitWeight(id: number): number {
  const mixed = Math.imul(id ^ 0x9e3779b9, 0x85ebca6b) >>> 0;
  return 0.1 + 0.9 * (mixed / 0x100000000);
}

/**
 * Deterministic reference checkpoint.
 *
 * Logits are linear in the mean absolute amplitude of the audio (so zeroing
 * any waveform segment moves them) and in per-token pseudo-weights of the
 * unmasked question tokens (so masking any question token moves them too);
 * a per-answer-token offset keeps the answer tokens distinguishable.
 */
export class ToyCheckpoint implements Checkpoint {
  readonly modelId = "toy-audio-lm";

  constructor(private readonly config: AdapterConfig) {}

  tokenize(text: string): TokenizeResponse {
    return tokenize(text);
  }

  generate(samples: Float64Array, tokenIds: number[]): GenerateResponse {
    const letterIndex = this.pickLetter(samples, tokenIds);
    const answerText = `(${LETTERS[letterIndex]}) ${ANSWER_WORDS[letterIndex]}`;
    const answerTokenIds = answerText.split(" ").map(tokenIdFor);
    const answerPositions = answerTokenIds.map((_, i) => tokenIds.length + i);
    const answerLogits = this.score(samples, tokenIds, answerTokenIds, answerPositions);
    return {
      answer_token_ids: answerTokenIds,
      answer_positions: answerPositions,
      answer_logits: answerLogits,
      answer_text: answerText,
    };
  }

  score(
    samples: Float64Array,
    tokenIds: number[],
    answerTokenIds: number[],
    answerPositions: number[],
  ): number[] {
    const audio = this.audioSignal(samples);
    const text = this.textSignal(tokenIds);
    return answerTokenIds.map(
      (id, i) => 2.0 * audio + 1.0 * text + 0.25 * unitWeight(id) + 0.01 * answerPositions[i],
    );
  }

  private audioSignal(samples: Float64Array): number {
    if (samples.length === 0) {
      return 0;
    }
    let total = 0;
    for (let i = 0; i < samples.length; i++) {
      total += Math.abs(samples[i]);
    }
    return total / samples.length;
  }

  private textSignal(tokenIds: number[]): number {
    const positions = maskablePositions(tokenIds);
    if (positions.length === 0) {
      return 0;
    }
    let total = 0;
    for (const pos of positions) {
      if (tokenIds[pos] !== this.config.mask_token_id) {
        total += unitWeight(tokenIds[pos]);
      }
    }
    return total / positions.length;
  }

  private pickLetter(samples: Float64Array, tokenIds: number[]): number {
    const idSum = tokenIds.reduce((acc, id) => (acc + id) >>> 0, 0);
    const energy = Math.round(this.audioSignal(samples) * 1e6);
    return (idSum + energy) % LETTERS.length;
  }
}

export function createCheckpoint(config: AdapterConfig): Checkpoint {
  if (config.checkpoint === "toy") {
    return new ToyCheckpoint(config);
  }
  throw new Error(
    `unknown checkpoint '${config.checkpoint}'; register real checkpoints in createCheckpoint`,
  );
}
