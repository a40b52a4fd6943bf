"""Entry point for python -m resexp."""

from resexp.cli import cli

if __name__ == "__main__":
    cli()
