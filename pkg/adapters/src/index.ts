export * from './audio.js'
export * from './checkpoint.js'
export * from './formats.js'
export * from './image.js'
export { buildCli, runExtract, runInitCheckpoint } from './cli.js'
