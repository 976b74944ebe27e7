# Run registry module
