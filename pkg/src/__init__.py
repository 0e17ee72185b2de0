"""Init file for the tactile packing simulation package."""
