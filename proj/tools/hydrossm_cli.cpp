// Placeholder while the library lands; replaced by the full CLI.
int main() { return 0; }
