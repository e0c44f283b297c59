"""Runtime verification of timing properties over MiniLang programs."""

# lang and scfg import each other; loading lang first fixes the order
from cftl import lang  # noqa: F401,E402
