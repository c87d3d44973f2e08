/* tslint:disable */
/* eslint-disable */

/**
 * Win probability and match quality as the mean gap sweeps `[-span, span]`.
 *
 * Flat triples `[gap, p_win, quality, ...]`, `points` of them.
 */
export function curves(sigma_a: number, sigma_b: number, beta: number, span: number, points: number): Float64Array;

/**
 * Run one synthetic experiment. `config` is an experiment JSON object
 * (missing keys take the deployed-scale defaults); returns the report JSON.
 */
export function simulate(config: string, seed: bigint): string;

/**
 * One "winner beats loser" update.
 *
 * Returns `[mu_w, sigma_w, mu_l, sigma_l, p_win_before, quality_before]`.
 */
export function update(mu_w: number, sigma_w: number, mu_l: number, sigma_l: number, beta: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly curves: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly simulate: (a: number, b: number, c: bigint) => [number, number, number, number];
    readonly update: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
