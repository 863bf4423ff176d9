/* tslint:disable */
/* eslint-disable */

/**
 * Filtered synthetic run on the canonical scenario shortened to `duration`.
 */
export class Trajectory {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Per frame: `t, true px, py, pz, estimated px, py, pz`.
     */
    points(): Float64Array;
    summary(): string;
}

/**
 * Quaternion `[w x y z]` followed by the row-major rotation matrix.
 */
export function rotvec_to_attitude(x: number, y: number, z: number): Float64Array;

/**
 * `[γ, c/c̄]` pairs for `n` logits evenly spaced over `[-range, range]`.
 */
export function scaling_curve(upsilon: number, range: number, n: number): Float64Array;

export function simulate(seed: bigint, duration: number, vision: boolean): Trajectory;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_trajectory_free: (a: number, b: number) => void;
    readonly rotvec_to_attitude: (a: number, b: number, c: number) => [number, number];
    readonly scaling_curve: (a: number, b: number, c: number) => [number, number, number, number];
    readonly simulate: (a: bigint, b: number, c: number) => [number, number, number];
    readonly trajectory_points: (a: number) => [number, number];
    readonly trajectory_summary: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
