/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_surrogatelab_free: (a: number, b: number) => void;
export const random_injections: (a: number) => [number, number];
export const solve_case: (a: number, b: number) => [number, number, number, number];
export const surrogatelab_compare: (a: number, b: number, c: number) => [number, number, number, number];
export const surrogatelab_new: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const surrogatelab_test_mse: (a: number) => [number, number, number];
export const surrogatelab_train_epoch: (a: number) => [number, number, number, number];
export const __externref_table_alloc: () => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
