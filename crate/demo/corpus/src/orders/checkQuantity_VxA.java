public int checkQuantity(String raw) {
    return Integer.parseInt(raw);
}
