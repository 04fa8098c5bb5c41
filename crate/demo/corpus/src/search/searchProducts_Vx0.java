public List<Product> searchProducts(@RequestParam String q, @RequestParam(defaultValue = "0") String page) {
    String term = InputValidator.requireText(q, 1, 64);
    int pageNo = InputValidator.requireInt(page, 0, 500);
    return jdbc.query("SELECT id, name, price FROM products WHERE name LIKE ? LIMIT 20 OFFSET ?",
            productMapper, "%" + term + "%", pageNo * 20);
}
