// Client-side pre-check of the verified-source rule. The server stays
// authoritative; this only gates the submit button so annotators see the
// problem before a round trip.

export const DEFAULT_ALLOWLIST = ['wikipedia.org']

export function hostOf(url: string): string | null {
  try {
    return new URL(url).hostname
  } catch {
    return null
  }
}

export function hostAllowed(url: string, allowlist: readonly string[] = DEFAULT_ALLOWLIST): boolean {
  const host = hostOf(url)
  if (!host) return false
  return allowlist.some((allowed) => host === allowed || host.endsWith('.' + allowed))
}
