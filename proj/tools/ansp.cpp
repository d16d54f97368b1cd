// Placeholder entry point; filled in once the training stack exists.
int main() { return 0; }
