/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_curve_free: (a: number, b: number) => void;
export const curve_caption: (a: number) => [number, number];
export const curve_x: (a: number) => [number, number];
export const curve_y: (a: number) => [number, number];
export const decay_curve: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
export const lyapunov_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const psi_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
