/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const basis_report: (a: number) => [number, number];
export const cluster_summary: (a: number, b: number, c: number, d: number, e: number) => [number, number];
export const decay_report: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number];
export const field_slice: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
