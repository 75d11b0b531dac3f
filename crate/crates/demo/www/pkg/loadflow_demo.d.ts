/* tslint:disable */
/* eslint-disable */

export class SurrogateLab {
    free(): void;
    [Symbol.dispose](): void;
    compare(injections: string): string;
    constructor(arch: string, samples: number, width: number, seed: number, learning_rate: number);
    test_mse(): number;
    train_epoch(): string;
}

export function random_injections(seed: number): string;

export function solve_case(injections: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_surrogatelab_free: (a: number, b: number) => void;
    readonly random_injections: (a: number) => [number, number];
    readonly solve_case: (a: number, b: number) => [number, number, number, number];
    readonly surrogatelab_compare: (a: number, b: number, c: number) => [number, number, number, number];
    readonly surrogatelab_new: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly surrogatelab_test_mse: (a: number) => [number, number, number];
    readonly surrogatelab_train_epoch: (a: number) => [number, number, number, number];
    readonly __externref_table_alloc: () => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
