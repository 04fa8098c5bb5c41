public List<Product> searchProducts(@RequestParam String q, @RequestParam(defaultValue = "0") String page) {
    String sql = "SELECT id, name, price FROM products WHERE name LIKE '%" + q + "%' LIMIT 20 OFFSET " + page;
    return jdbc.query(sql, productMapper);
}
