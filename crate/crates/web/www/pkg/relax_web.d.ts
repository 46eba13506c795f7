/* tslint:disable */
/* eslint-disable */

/**
 * Chatters the half/half measure on `{−1, 1}` for the built-in `p1` with
 * `n` switching cycles and reports the trajectory and its cost.
 */
export function chatter_p1(n: number, sim_intervals: number): string;

/**
 * `L(u) = c u² + w (1 − u²)²` on `[−1, 1]` and its convex envelope over an
 * `atoms`-point net, sampled on `[−1.2, 1.2]`.
 */
export function envelope_curve(control_weight: number, double_well: number, atoms: number): string;

/**
 * `−x′ ∈ N_[0,∞)(x) + h` with `x(0) = x0` and constant push `h > 0`:
 * the state slides down at rate `h` and sticks at 0.
 */
export function unilateral(x0: number, push: number, horizon: number, intervals: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly chatter_p1: (a: number, b: number) => [number, number, number, number];
    readonly envelope_curve: (a: number, b: number, c: number) => [number, number, number, number];
    readonly unilateral: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
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
