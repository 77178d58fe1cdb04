"""Allow ``python -m re2gec`` as an alias for the ``re2gec`` console script."""

from re2gec.cli import main

main()
