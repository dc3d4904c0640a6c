#!/usr/bin/env python3
"""
CLI entry point for dhym-lab.
"""

from dhym_lab.cli import app


def main() -> None:
    """Run the command line application."""
    app()


if __name__ == "__main__":
    main()
