MODES = ("geometric", "one-large", "one-small", "arithmetic")
DEFAULT_MODE = "geometric"
DEFAULT_KIND = "dense-sym"

# A = Q D Q^T is formed in double-word up to this size, in working precision above
DW_FORMATION_LIMIT = 1024

FIXTURE_MAGIC = int.from_bytes(b"FWDEIG01", "little")
FIXTURE_HEADER_WORDS = 4  # magic, rows, cols, flags
FIXTURE_FLAG_SYMMETRIC = 1

MESSAGE_FIXTURE_MAGIC = "{path}: not a forwardeig fixture (bad magic)"
MESSAGE_FIXTURE_SIZE = "{path}: header announces {rows}x{cols} entries, file holds {count}"
