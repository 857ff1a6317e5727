"""Grey-box thrust estimation for small turbojets."""
