#!/usr/bin/env python3
"""
Richardson solver laboratory entry point
Dispatches to the command-line interface in backend/app/cli.py
"""

import sys
import os

# Add the backend directory to the Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'backend'))

from app.cli import main

if __name__ == "__main__":
    sys.exit(main())
