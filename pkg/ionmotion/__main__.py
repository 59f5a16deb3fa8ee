"""
ionmotion module entry point
"""

if __name__ == "__main__":
    import sys

    from .commands import ionmotion
    sys.exit(ionmotion.main())
