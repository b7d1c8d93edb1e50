/**
 * Service base URL resolution, in priority order:
 *  1. `?api=` query parameter (handy for pointing a static build at any host)
 *  2. `window.RISKNEXUS_BASE_URL` (runtime config injected by the host page)
 *  3. same origin as the page.
 */

declare global {
  interface Window {
    RISKNEXUS_BASE_URL?: string;
  }
}

export function resolveBaseUrl(
  search: string = typeof location !== "undefined" ? location.search : "",
  injected: string | undefined = typeof window !== "undefined"
    ? window.RISKNEXUS_BASE_URL
    : undefined,
  origin: string = typeof location !== "undefined" ? location.origin : "http://127.0.0.1:8000",
): string {
  const fromQuery = new URLSearchParams(search).get("api");
  const chosen = fromQuery || injected || origin;
  return chosen.replace(/\/+$/, "");
}
