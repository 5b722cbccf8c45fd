/**
 * Image adapters: logo / clothing / tattoo detectors and the age & gender
 * network. Every patch is resized to 128x128, average-pooled into the
 * checkpoint's grid, and projected through the frozen weights.
 */
import fs from 'node:fs'
import path from 'node:path'

import { Checkpoint, gridSize, project } from './checkpoint.js'
import { Image, readPnm } from './formats.js'

export const INPUT_SIZE = 128

/** Luminance in [0, 1], row-major. */
export function toGray(img: Image): Float64Array {
  const out = new Float64Array(img.width * img.height)
  if (img.channels === 1) {
    for (let i = 0; i < out.length; i++) out[i] = img.data[i] / 255
  } else {
    for (let i = 0; i < out.length; i++) {
      const r = img.data[3 * i]
      const g = img.data[3 * i + 1]
      const b = img.data[3 * i + 2]
      out[i] = (0.299 * r + 0.587 * g + 0.114 * b) / 255
    }
  }
  return out
}

/** Bilinear resize of a grayscale plane to 128x128. */
export function resizeToInput(gray: Float64Array, width: number, height: number): Float64Array {
  const out = new Float64Array(INPUT_SIZE * INPUT_SIZE)
  const sx = width / INPUT_SIZE
  const sy = height / INPUT_SIZE
  for (let y = 0; y < INPUT_SIZE; y++) {
    const fy = Math.min(height - 1, Math.max(0, (y + 0.5) * sy - 0.5))
    const y0 = Math.floor(fy)
    const y1 = Math.min(height - 1, y0 + 1)
    const wy = fy - y0
    for (let x = 0; x < INPUT_SIZE; x++) {
      const fx = Math.min(width - 1, Math.max(0, (x + 0.5) * sx - 0.5))
      const x0 = Math.floor(fx)
      const x1 = Math.min(width - 1, x0 + 1)
      const wx = fx - x0
      const top = gray[y0 * width + x0] * (1 - wx) + gray[y0 * width + x1] * wx
      const bot = gray[y1 * width + x0] * (1 - wx) + gray[y1 * width + x1] * wx
      out[y * INPUT_SIZE + x] = top * (1 - wy) + bot * wy
    }
  }
  return out
}

/** Spatial average pooling of the 128x128 plane into a g x g grid, flattened. */
export function pooledGrid(plane: Float64Array, g: number): Float64Array {
  const cell = INPUT_SIZE / g
  const out = new Float64Array(g * g)
  for (let gy = 0; gy < g; gy++) {
    for (let gx = 0; gx < g; gx++) {
      let acc = 0
      for (let y = gy * cell; y < (gy + 1) * cell; y++) {
        for (let x = gx * cell; x < (gx + 1) * cell; x++) {
          acc += plane[y * INPUT_SIZE + x]
        }
      }
      out[gy * g + gx] = acc / (cell * cell)
    }
  }
  return out
}

export function extractImageRow(file: string, ck: Checkpoint): Float32Array {
  const img = readPnm(file)
  const plane = resizeToInput(toGray(img), img.width, img.height)
  const g = ck.kind === 'age_gender' ? 16 : gridSize(ck.scale)
  return project(ck, pooledGrid(plane, g))
}

/** Patch for sample `id` is `<id>.pgm` or `<id>.ppm` under `inputsDir`. */
export function patchPath(inputsDir: string, id: string): string {
  for (const ext of ['.pgm', '.ppm']) {
    const p = path.join(inputsDir, id + ext)
    if (fs.existsSync(p)) return p
  }
  throw new Error(`unreadable image: no ${id}.pgm or ${id}.ppm in ${inputsDir}`)
}

export function extractImageBlock(inputsDir: string, sampleIds: string[], ck: Checkpoint): Float32Array[] {
  return sampleIds.map(id => extractImageRow(patchPath(inputsDir, id), ck))
}
