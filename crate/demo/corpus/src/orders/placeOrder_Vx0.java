public ResponseEntity<String> placeOrder(@RequestParam String productId, @RequestParam String quantity, HttpSession session) {
    if (!PRODUCT_ID.matcher(productId).matches()) {
        return ResponseEntity.badRequest().body("unknown product");
    }
    int qty = checkQuantity(quantity);
    Customer customer = (Customer) session.getAttribute("customer");
    orderService.place(customer.getId(), productId, qty);
    return ResponseEntity.ok("order placed");
}
