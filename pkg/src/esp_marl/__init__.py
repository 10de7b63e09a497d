"""ESP: symmetry augmentation and consistency losses for cooperative MARL."""
