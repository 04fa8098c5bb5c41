public ResponseEntity<String> placeOrder(@RequestParam String productId, @RequestParam String quantity, @RequestParam String customerId) {
    int qty = checkQuantity(quantity);
    orderService.place(customerId, productId, qty);
    return ResponseEntity.ok("order placed for " + customerId);
}
