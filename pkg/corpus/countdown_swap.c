int main() {
    int x;
    int y = 0;
    int z = x;
    if (x <= 0) return 0;
    while (x > 0) {
        x--;
        y++;
    }
    assert(y == z);
    return 0;
}
