"""Domain logic: radiometry, alignment, supervision, losses, training, metrics."""
