/**
 * Frozen extractor checkpoints.
 *
 * Each adapter projects a fixed pooled representation through a frozen
 * weight matrix loaded from a checkpoint file. `initCheckpoint` generates
 * such a checkpoint deterministically from a seed, standing in for a
 * downloaded pretrained model; extraction never trains or updates it.
 */
import fs from 'node:fs'

export const KINDS = ['logo', 'clothing', 'tattoo', 'age_gender', 'audio'] as const
export type Kind = (typeof KINDS)[number]

export const DETECTOR_KINDS: Kind[] = ['logo', 'clothing', 'tattoo']

/** Output dims fixed by the extractor family (others are checkpoint-declared). */
export const FIXED_DIMS: Partial<Record<Kind, number>> = {
  age_gender: 512,
  audio: 2048,
}

/** Per-frame audio summary width: 16 log band energies x {mean, std, max, min}. */
export const AUDIO_SUMMARY_DIM = 64

export type Checkpoint = {
  kind: Kind
  /** length of every emitted row */
  dim: number
  /** backbone scale index; detector kinds only */
  scale: number
  /** pooled representation width the projection consumes */
  inputFeatures: number
  /** dim x inputFeatures projection, row-major */
  weights: Float32Array
}

/** Deterministic 32-bit PRNG (mulberry32), uniform in [0, 1). */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0
  return () => {
    a = (a + 0x6d2b79f5) >>> 0
    let t = a
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

/** Grid side length of the pooled representation at backbone scale `s`. */
export function gridSize(scale: number): number {
  if (!Number.isInteger(scale) || scale < 0 || scale > 3) {
    throw new Error(`scale index must be in 0..3, got ${scale}`)
  }
  return 32 >> scale
}

export function inputFeaturesFor(kind: Kind, scale: number): number {
  if (kind === 'audio') return AUDIO_SUMMARY_DIM
  if (kind === 'age_gender') return 16 * 16
  const g = gridSize(scale)
  return g * g
}

export function initCheckpoint(
  kind: Kind,
  opts: { dim?: number; scale?: number; seed?: number } = {},
): Checkpoint {
  if (!KINDS.includes(kind)) throw new Error(`unknown adapter kind: ${kind}`)
  const scale = opts.scale ?? 1
  const fixed = FIXED_DIMS[kind]
  const dim = fixed ?? opts.dim ?? 256
  if (fixed !== undefined && opts.dim !== undefined && opts.dim !== fixed) {
    throw new Error(`${kind} rows are always ${fixed}-dimensional; got --dim ${opts.dim}`)
  }
  const inputFeatures = inputFeaturesFor(kind, scale)
  const rand = mulberry32(opts.seed ?? 0)
  const bound = 1 / Math.sqrt(inputFeatures)
  const weights = new Float32Array(dim * inputFeatures)
  for (let i = 0; i < weights.length; i++) weights[i] = (2 * rand() - 1) * bound
  return { kind, dim, scale, inputFeatures, weights }
}

export function saveCheckpoint(file: string, ck: Checkpoint): void {
  const payload = {
    kind: ck.kind,
    dim: ck.dim,
    scale: ck.scale,
    input_features: ck.inputFeatures,
    weights_b64: Buffer.from(ck.weights.buffer, ck.weights.byteOffset, ck.weights.byteLength).toString('base64'),
  }
  fs.writeFileSync(file, JSON.stringify(payload, null, 2) + '\n')
}

export function loadCheckpoint(file: string, expectedKind?: Kind): Checkpoint {
  const raw = JSON.parse(fs.readFileSync(file, 'utf8'))
  const kind = raw.kind as Kind
  if (!KINDS.includes(kind)) throw new Error(`${file}: unknown adapter kind ${JSON.stringify(raw.kind)}`)
  if (expectedKind && kind !== expectedKind) {
    throw new Error(`checkpoint mismatch: ${file} is for ${kind}, command expects ${expectedKind}`)
  }
  const bytes = Buffer.from(raw.weights_b64, 'base64')
  const weights = new Float32Array(bytes.buffer.slice(bytes.byteOffset, bytes.byteOffset + bytes.byteLength))
  const ck: Checkpoint = {
    kind,
    dim: raw.dim,
    scale: raw.scale,
    inputFeatures: raw.input_features,
    weights,
  }
  if (weights.length !== ck.dim * ck.inputFeatures) {
    throw new Error(
      `checkpoint mismatch: ${file} holds ${weights.length} weights, ` +
        `schema needs ${ck.dim}x${ck.inputFeatures}`,
    )
  }
  return ck
}

/** out = tanh(W (x - mean(x))), rounded to float32. */
export function project(ck: Checkpoint, features: Float64Array): Float32Array {
  if (features.length !== ck.inputFeatures) {
    throw new Error(
      `checkpoint mismatch: got ${features.length} pooled features, ` +
        `checkpoint expects ${ck.inputFeatures}`,
    )
  }
  let mean = 0
  for (let j = 0; j < features.length; j++) mean += features[j]
  mean /= features.length
  const out = new Float32Array(ck.dim)
  for (let o = 0; o < ck.dim; o++) {
    let acc = 0
    const base = o * ck.inputFeatures
    for (let j = 0; j < ck.inputFeatures; j++) acc += ck.weights[base + j] * (features[j] - mean)
    out[o] = Math.tanh(acc)
  }
  return out
}
