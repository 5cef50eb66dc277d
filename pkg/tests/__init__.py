"""attdetengine test suite."""
