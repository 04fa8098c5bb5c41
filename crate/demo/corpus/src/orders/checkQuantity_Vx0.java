public int checkQuantity(String raw) {
    int qty;
    try {
        qty = Integer.parseInt(raw.trim());
    } catch (NumberFormatException e) {
        throw new ValidationException("quantity must be a whole number");
    }
    if (qty < 1 || qty > 100) {
        throw new ValidationException("quantity out of range");
    }
    return qty;
}
