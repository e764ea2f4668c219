# Command module initialization
