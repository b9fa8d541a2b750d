"""HTTP front end over :mod:`gpdistill.ops`."""
