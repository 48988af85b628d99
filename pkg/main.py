import sys

from forwardeig.cli import main
from util import get_logger

logger = get_logger(__name__)

if __name__ == "__main__":
    sys.exit(main())
