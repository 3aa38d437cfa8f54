#!/usr/bin/env python3
"""
skyfair runner script
"""

import sys

def check_requirements():
    """Check if requirements are installed"""
    try:
        import numpy
        import pydantic
        import pydantic_settings
        import structlog
        print("✅ Basic requirements found")
        return True
    except ImportError as e:
        print(f"❌ Missing requirements: {e}")
        print("Please install requirements: pip install -r requirements-minimal.txt")
        return False

def setup_directories():
    """Create necessary directories"""
    from skyfair.core.config import get_settings, setup_output_directory

    out = setup_output_directory(get_settings().OUTPUT_DIR)
    print(f"✅ Output directory ready: {out}")

def main():
    """Main runner function"""
    print("🚀 skyfair aerial base station simulator", file=sys.stderr)
    print("=" * 30, file=sys.stderr)

    if not check_requirements():
        sys.exit(1)

    setup_directories()

    # Default to a quick desk-sized run when no arguments are given
    argv = sys.argv[1:] or ["simulate", "--config", "configs/desk.conf", "--preset", "desk"]
    print(f"\n🌟 skyfair {' '.join(argv)}\n", file=sys.stderr)

    from skyfair.main import main as skyfair_main

    try:
        sys.exit(skyfair_main(argv))
    except KeyboardInterrupt:
        print("\n👋 Stopped")
        sys.exit(130)

if __name__ == "__main__":
    main()
