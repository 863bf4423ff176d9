/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_trajectory_free: (a: number, b: number) => void;
export const rotvec_to_attitude: (a: number, b: number, c: number) => [number, number];
export const scaling_curve: (a: number, b: number, c: number) => [number, number, number, number];
export const simulate: (a: bigint, b: number, c: number) => [number, number, number];
export const trajectory_points: (a: number) => [number, number];
export const trajectory_summary: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
