/** Evaluator's own consultation note, kept on screen through all five
 * post-edits and autosaved locally so a reload never loses it.
 */

export interface KVStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export class Scratchpad {
  private readonly key: string;
  private readonly store: KVStore;

  constructor(consultationId: string, store: KVStore) {
    this.key = `noteval-scratchpad:${consultationId}`;
    this.store = store;
  }

  load(): string {
    return this.store.getItem(this.key) ?? "";
  }

  save(text: string): void {
    this.store.setItem(this.key, text);
  }
}
