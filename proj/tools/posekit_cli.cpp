// placeholder; the real CLI lands with the pipeline modules
int main() { return 0; }
