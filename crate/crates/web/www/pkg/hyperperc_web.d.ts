/* tslint:disable */
/* eslint-disable */

/**
 * Inclined basis of `Z^n` with its separation constant.
 */
export function basis_report(n: number): string;

/**
 * Size of the origin cluster in `[-half, half]^3` and whether it reaches
 * the boundary, as JSON.
 */
export function cluster_summary(seed: number, p12: number, p13: number, p23: number, half: number): string;

/**
 * Decay curve of `[o ↔ ∂B(K)]` (or the truncated event with `M = 4K`)
 * for `K = 1..=k_max`, with both fits and the model-selection verdict.
 */
export function decay_report(seed: number, p12: number, p13: number, p23: number, trials: number, k_max: number, truncated: boolean): string;

/**
 * Horizontal slice `x_3 = level` of an `n = 3, k = 2` field over
 * `[-half, half]^2`, row-major with `x_1` as the row. Sites of the origin
 * cluster (explored inside `[-half, half]^3`) are marked `2`.
 */
export function field_slice(seed: number, p12: number, p13: number, p23: number, half: number, level: number): Uint8Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly basis_report: (a: number) => [number, number];
    readonly cluster_summary: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly decay_report: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number];
    readonly field_slice: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
