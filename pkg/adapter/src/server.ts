/**
 * Express app implementing the /v1 masked-inference protocol.
 *
 * Validation mirrors the protocol contract: mismatched answer arities,
 * oversized batches, non-greedy generation requests, and malformed audio or
 * JSON are rejected with 400 error bodies; unknown routes give 404.
 */

import express, { Express, NextFunction, Request, Response } from "express";

import { AdapterConfig, Checkpoint } from "./checkpoint.js";
import {
  BadRequestError,
  ErrorBody,
  decodeAudio,
  requireIntArray,
  requireString,
} from "./protocol.js";

function errorBody(code: string, message: string): ErrorBody {
  return { error: { code, message } };
}

export function buildApp(checkpoint: Checkpoint, config: AdapterConfig): Express {
  const app = express();
  app.use(express.json({ limit: "128mb" }));

  app.get("/v1/describe", (_req, res) => {
    res.json({
      model_id: checkpoint.modelId,
      sample_rate_hz: config.sample_rate_hz,
      max_audio_seconds: config.max_audio_seconds,
      mask_token_id: config.mask_token_id,
      protected_tokens: config.protected_tokens,
      max_batch: config.max_batch,
      logit_tolerance: config.logit_tolerance,
    });
  });

  app.post("/v1/tokenize", (req, res) => {
    const text = requireString(req.body?.text, "text");
    res.json(checkpoint.tokenize(text));
  });

  app.post("/v1/generate", (req, res) => {
    if (req.body?.greedy !== true) {
      throw new BadRequestError("only greedy generation is supported", "unsupported");
    }
    const samples = decodeAudio(requireString(req.body?.audio_f32_b64, "audio_f32_b64"));
    checkAudioLength(samples, config);
    const tokenIds = requireIntArray(req.body?.token_ids, "token_ids");
    const trace = checkpoint.generate(samples, tokenIds);
    if (trace.answer_token_ids.length === 0) {
      throw new BadRequestError("checkpoint generated an empty answer", "empty_generation");
    }
    res.json(trace);
  });

  app.post("/v1/score", (req, res) => {
    const variants = req.body?.variants;
    if (!Array.isArray(variants) || variants.length === 0) {
      throw new BadRequestError("field 'variants' must be a non-empty list");
    }
    if (variants.length > config.max_batch) {
      throw new BadRequestError(
        `batch of ${variants.length} exceeds max_batch ${config.max_batch}`,
      );
    }
    const answerIds = requireIntArray(req.body?.answer_token_ids, "answer_token_ids");
    const answerPositions = requireIntArray(req.body?.answer_positions, "answer_positions");
    if (answerIds.length !== answerPositions.length) {
      throw new BadRequestError(
        `answer_token_ids (${answerIds.length}) and answer_positions ` +
          `(${answerPositions.length}) must have equal length`,
      );
    }
    if (answerIds.length === 0) {
      throw new BadRequestError("answer_token_ids must be non-empty");
    }
    const logits = variants.map((variant: unknown, index: number) => {
      if (typeof variant !== "object" || variant === null) {
        throw new BadRequestError(`variants[${index}] must be an object`);
      }
      const v = variant as Record<string, unknown>;
      const samples = decodeAudio(requireString(v.audio_f32_b64, `variants[${index}].audio_f32_b64`));
      checkAudioLength(samples, config);
      const tokenIds = requireIntArray(v.token_ids, `variants[${index}].token_ids`);
      return checkpoint.score(samples, tokenIds, answerIds, answerPositions);
    });
    res.json({ logits });
  });

  app.use((req, res) => {
    res.status(404).json(errorBody("not_found", `unknown route ${req.path}`));
  });

  app.use((err: Error, _req: Request, res: Response, _next: NextFunction) => {
    if (err instanceof BadRequestError) {
      res.status(400).json(errorBody(err.code, err.message));
      return;
    }
    if (err && "type" in err && (err as { type?: string }).type === "entity.parse.failed") {
      res.status(400).json(errorBody("bad_request", "request body is not valid JSON"));
      return;
    }
    res.status(500).json(errorBody("internal", `${err.name}: ${err.message}`));
  });

  return app;
}

function checkAudioLength(samples: Float64Array, config: AdapterConfig): void {
  if (config.max_audio_seconds === null) {
    return;
  }
  const limit = Math.round(config.max_audio_seconds * config.sample_rate_hz);
  if (samples.length > limit) {
    throw new BadRequestError(
      `audio of ${samples.length} samples exceeds max_audio_seconds ` +
        `${config.max_audio_seconds}; the client must truncate`,
      "audio_too_long",
    );
  }
}
