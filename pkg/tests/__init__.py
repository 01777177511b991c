# Surfactant simulator - Test Suite
# Test package initialization
