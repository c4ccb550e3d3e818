# Cocycle Lab Tests
