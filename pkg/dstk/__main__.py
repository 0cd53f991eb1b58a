"""Entry point for dstk CLI."""

from dstk.cli import cli

if __name__ == "__main__":
    cli()
