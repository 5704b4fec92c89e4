/* tslint:disable */
/* eslint-disable */

export class Trajectory {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly data: Float64Array;
    readonly stride: number;
    readonly termination: string;
}

/**
 * `kappa` heat map for a two-unit network (empty `j` selects the gradient
 * system); see [`kappa_grid`].
 */
export function kappaHeatmap(j: Float64Array, r: Float64Array, i_ext: Float64Array, lo: number, hi: number, m: number, route: string): Float64Array;

export function legendreCurves(range: number, m: number): Float64Array;

export function simulate(j: Float64Array, r: Float64Array, i_ext: Float64Array, u0: Float64Array, dt: number, t_max: number, every: number): Trajectory;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_trajectory_free: (a: number, b: number) => void;
    readonly kappaHeatmap: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number, k: number) => [number, number, number, number];
    readonly legendreCurves: (a: number, b: number) => [number, number, number, number];
    readonly simulate: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number, k: number) => [number, number, number];
    readonly trajectory_data: (a: number) => [number, number];
    readonly trajectory_stride: (a: number) => number;
    readonly trajectory_termination: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
